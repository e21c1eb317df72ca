import json
import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bandlattice import (
    Boundary,
    EdgeContaminationWarning,
    Lattice,
    SampledField,
    TestFunction,
    integrate_product,
    lattice_momenta,
    load_field,
    periodic_sinc,
    random_test_function,
    reconstruct,
    resample,
    sample,
    save_field,
    sinc_pi,
)


# --- sinc ------------------------------------------------------------------

def test_sinc_at_zero_is_one():
    assert sinc_pi(0.0) == 1.0


@pytest.mark.parametrize("n", [-7, -2, -1, 1, 2, 3, 1000])
def test_sinc_vanishes_exactly_on_nonzero_integers(n):
    assert sinc_pi(float(n)) == 0.0


def test_sinc_half():
    assert sinc_pi(0.5) == pytest.approx(2 / math.pi, rel=1e-15)


@given(st.floats(-50, 50, allow_nan=False))
def test_sinc_is_even(x):
    assert sinc_pi(x) == sinc_pi(-x)


def test_periodic_sinc_is_kronecker_on_integers():
    u = np.arange(-20, 21)
    vals = periodic_sinc(u.astype(float), 7)
    assert np.array_equal(vals, (u % 7 == 0).astype(float))


def test_periodic_sinc_matches_image_sum():
    # Dirichlet kernel = periodization of sinc (slowly convergent; compare with many images)
    u, n = 0.37, 9
    images = np.arange(-200_000, 200_001)
    direct = np.sum(np.sinc(u + n * images)) * 1.0
    assert periodic_sinc(u, n) == pytest.approx(direct, abs=1e-5)


# --- lattice ---------------------------------------------------------------

def test_lattice_validation():
    with pytest.raises(ValueError):
        Lattice(0.0)
    with pytest.raises(ValueError):
        Lattice(1.0, offset=1.0)
    with pytest.raises(ValueError):
        Lattice(1.0, offset=-0.1)
    with pytest.raises(ValueError):
        Lattice(1.0, size=0)


def test_lattice_points_and_bandlimit():
    lat = Lattice(0.5, 0.2, 4, "truncated")
    assert np.allclose(lat.points(), [0.2, 0.7, 1.2, 1.7])
    assert lat.bandlimit == pytest.approx(2 * math.pi)
    assert Lattice.from_dict(lat.to_dict()) == lat


def test_lattice_momenta_are_inside_band(lat257):
    k = lattice_momenta(lat257)
    assert k.size == 257
    assert np.all(np.abs(k) < lat257.bandlimit)
    assert np.allclose(np.diff(k), 2 * math.pi / lat257.period)


# --- sampling --------------------------------------------------------------

def test_zero_wavenumber_plane_wave_is_all_ones():
    lat = Lattice(0.3, 0.1, 11, "truncated")
    assert np.array_equal(sample(TestFunction.plane_wave(0.0), lat).values, np.ones(11))


def test_on_lattice_sinc_pulse_is_kronecker():
    lat = Lattice(1.0, 0.0, 16, "truncated")
    f = sample(TestFunction.sinc_pulse(center=5.0, width=1.0), lat)
    assert np.array_equal(f.values, SampledField.kronecker(lat, 5).values)


def test_half_band_plane_wave_samples():
    lat = Lattice(1.0, 0.0, 8, "truncated")
    k = 0.5 * lat.bandlimit
    f = sample(TestFunction.plane_wave(k), lat)
    assert np.allclose(f.values, np.exp(-1j * 0.5 * np.pi * np.arange(8)), atol=1e-15)


@pytest.mark.parametrize("k_fraction", [1.0, 1.2, -1.0])
def test_sample_rejects_components_at_or_beyond_band(k_fraction):
    lat = Lattice(1.0, 0.0, 8, "truncated")
    with pytest.raises(ValueError):
        sample(TestFunction.plane_wave(k_fraction * lat.bandlimit), lat)


def test_sample_rejects_too_narrow_sinc():
    with pytest.raises(ValueError):
        sample(TestFunction.sinc_pulse(0.0, width=0.5), Lattice(1.0, 0.0, 8, "truncated"))


def test_sample_warns_on_non_periodic_wavenumber():
    lat = Lattice(1.0, 0.0, 9)
    with pytest.warns(UserWarning, match="not periodic"):
        sample(TestFunction.plane_wave(0.123), lat)


# --- reconstruction ----------------------------------------------------------

@pytest.mark.parametrize("boundary", ["periodic", "truncated"])
def test_kronecker_property_is_exact(rng, boundary):
    lat = Lattice(0.7, 0.3, 33, boundary)
    f = SampledField(lat, rng.normal(size=33))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EdgeContaminationWarning)
        assert np.array_equal(reconstruct(f, lat.points()), f.values)


def test_delta_reconstructs_to_sinc():
    lat = Lattice(1.0, 0.0, 64, "truncated")
    f = SampledField.kronecker(lat, 32)
    x = np.linspace(24.0, 40.0, 97)
    assert np.allclose(reconstruct(f, x), sinc_pi(x - 32.0), atol=1e-15)


def test_plane_wave_between_sites_even_n():
    lat = Lattice(1.0, 0.0, 512)
    k = 2 * np.pi * 179 / 512  # about 0.7 of the band
    f = sample(TestFunction.plane_wave(k), lat)
    x = np.arange(512) + 0.5
    assert np.max(np.abs(reconstruct(f, x) - np.exp(-1j * k * x))) < 1e-10


def test_truncated_reconstruction_warns_near_edges():
    lat = Lattice(1.0, 0.0, 64, "truncated")
    f = SampledField.kronecker(lat, 32)
    with pytest.warns(EdgeContaminationWarning):
        reconstruct(f, 2.5)


def test_truncated_interior_accuracy(rng):
    # sinc pulse decays like 1/x, so interior error is controlled by the discarded tail
    lat = Lattice(1.0, 0.0, 2001, "truncated")
    g = TestFunction.sinc_pulse(1000.3, 1.25)
    f = sample(g, lat)
    x = rng.uniform(900, 1100, 50)
    assert np.max(np.abs(reconstruct(f, x) - g(x))) < 5e-3


@given(st.integers(0, 2**32 - 1), st.floats(-3, 3), st.floats(-3, 3))
def test_reconstruction_is_linear(seed, alpha, beta):
    rng = np.random.default_rng(seed)
    lat = Lattice(1.0, 0.0, 65)
    f = SampledField(lat, rng.normal(size=65))
    g = SampledField(lat, rng.normal(size=65))
    x = rng.uniform(0, 65, 7)
    lhs = reconstruct(alpha * f + beta * g, x)
    rhs = alpha * reconstruct(f, x) + beta * reconstruct(g, x)
    scale = 1 + abs(alpha) + abs(beta)
    assert np.max(np.abs(lhs - rhs)) < 1e-12 * scale * 10


def test_oversampling_agrees(lat257, rng):
    f = random_test_function(rng, lat257, 6, 0.9)
    fine = Lattice(0.5, 0.0, 514)
    x = rng.uniform(0, 257, 300)
    a = reconstruct(sample(f, lat257), x)
    b = reconstruct(sample(f, fine), x)
    assert np.max(np.abs(a - b)) < 1e-9


# --- resampling ---------------------------------------------------------------

def test_resample_to_same_offset_is_identity(rng):
    lat = Lattice(1.0, 0.25, 31)
    f = SampledField(lat, rng.normal(size=31))
    assert np.array_equal(resample(f, 0.25).values, f.values)


def test_resample_delta_half_step():
    lat = Lattice(1.0, 0.0, 101)
    f = resample(SampledField.kronecker(lat, 0), 0.5)
    expected = periodic_sinc(np.arange(101) + 0.5, 101)
    assert np.allclose(f.values, expected, atol=1e-15)
    # close to the plain sinc near the delta
    assert f.values[0] == pytest.approx(sinc_pi(0.5), abs=2e-2)


@given(st.floats(0.0, 0.999), st.integers(0, 1000))
def test_resample_round_trip(b_new, seed):
    rng = np.random.default_rng(seed)
    lat = Lattice(1.0, 0.0, 129)
    f = sample(random_test_function(rng, lat, 5, 0.9), lat)
    back = resample(resample(f, b_new), 0.0)
    assert np.max(np.abs(back.values - f.values)) < 1e-10


def test_resample_rejects_bad_offset(lat257):
    f = SampledField.zeros(lat257)
    with pytest.raises(ValueError):
        resample(f, 1.0)
    with pytest.raises(ValueError):
        resample(f, -0.1)


# --- integration ---------------------------------------------------------------

def test_integrate_delta():
    lat = Lattice(0.4, 0.0, 10, "truncated")
    d = SampledField.kronecker(lat, 3)
    assert integrate_product(d, d) == pytest.approx(0.4)


def test_orthogonal_plane_waves(lat257):
    k = lattice_momenta(lat257)
    f = sample(TestFunction.plane_wave(k[10]), lat257)
    g = sample(TestFunction.plane_wave(k[40]), lat257)
    assert abs(integrate_product(f, g)) < 1e-12
    assert integrate_product(f, f) == pytest.approx(lat257.period, rel=1e-14)


def test_integrate_matches_continuum_quadrature(lat257, rng):
    f = sample(random_test_function(rng, lat257, 4, 0.4), lat257)
    g = sample(random_test_function(rng, lat257, 4, 0.4), lat257)
    # products have content below 0.8 of the band, so a 4x oversampled uniform rule is exact
    x = np.arange(4 * 257) * 0.25
    quad = 0.25 * np.sum(reconstruct(f, x) * reconstruct(g, x))
    assert integrate_product(f, g) == pytest.approx(quad, abs=1e-9)


def test_integrate_rejects_mismatch():
    with pytest.raises(ValueError):
        integrate_product(SampledField.zeros(Lattice(1.0, 0.0, 5)), SampledField.zeros(Lattice(1.0, 0.0, 7)))


# --- io ----------------------------------------------------------------------

def test_field_round_trip(tmp_path, rng):
    lat = Lattice(0.5, 0.1, 9, Boundary.TRUNCATED)
    f = SampledField(lat, rng.normal(size=9) + 1j * rng.normal(size=9))
    path = tmp_path / "f.csv"
    save_field(path, f)
    header = path.read_text().splitlines()[0]
    assert header == "j,x,value_re,value_im"
    assert json.loads(path.with_suffix(".json").read_text()) == {"dx": 0.5, "b": 0.1, "n": 9, "boundary": "truncated"}
    g = load_field(path)
    assert g.lattice == lat
    assert np.array_equal(g.values, f.values)
