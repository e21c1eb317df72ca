import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bandlattice import (
    Lattice,
    PhaseSpaceForm,
    SampledField,
    TestFunction,
    apply,
    build_bandlimited_kg,
    build_harmonic_chain,
    build_total_momentum,
    classical_flow,
    conservation_report,
    cubic_witness,
    derivative_kernel,
    energy,
    fock_oracle_commutator,
    lattice_momenta,
    quadratic_commutator,
    random_flow_state,
    random_quadratic_hamiltonian,
    random_test_function,
    reconstruct,
    resample,
    sample,
    symplectic_form,
    to_phase_space_form,
    translate_field,
    translation_generator,
)
from bandlattice.symmetry import Trajectory, save_report


# --- symplectic form and P ---------------------------------------------------------

def test_symplectic_form_properties():
    Om = symplectic_form(5)
    assert np.array_equal(Om.T, -Om)
    assert np.array_equal(Om @ Om, -np.eye(10))


def test_momentum_blocks():
    P = build_total_momentum(1.0, 9)
    A = P.form
    assert not np.any(A.qq) and not np.any(A.pp)
    assert np.array_equal(A.qp, -0.5 * P.D.T)
    assert np.array_equal(A.matrix[9:, :9], -0.5 * P.D)


def test_momentum_classical_value_matches_form(rng):
    P = build_total_momentum(0.5, 11)
    q, p = rng.normal(size=11), rng.normal(size=11)
    assert P.form.evaluate(q, p) == pytest.approx(P.evaluate(q, p), rel=1e-13)
    # explicit (1/dx) sum_i sum_n (-1)^n / n p_i q_{i+n} with the periodized row
    D = derivative_kernel(0.5, "periodic", 11)
    direct = sum(-D.coefficient(-n) * p[i] * q[(i + n) % 11] for i in range(11) for n in range(-5, 6) if n)
    assert P.evaluate(q, p) == pytest.approx(direct, rel=1e-12)


def test_momentum_of_constant_field_vanishes(rng):
    P = build_total_momentum(1.0, 31)
    assert abs(P.evaluate(np.full(31, 3.0), rng.normal(size=31))) < 1e-13


def test_momentum_is_shift_invariant():
    n = 13
    A = build_total_momentum(1.0, n).form.matrix
    S = np.roll(np.eye(n), 1, axis=0)
    T = np.block([[S, np.zeros((n, n))], [np.zeros((n, n)), S]])
    assert np.allclose(T @ A @ T.T, A, atol=1e-15)


def test_momentum_matches_continuum_integral(lat257):
    # P = -integral pi(x) phi'(x) dx with pi = p / dx; dense quadrature on reconstructions
    k = lattice_momenta(lat257)[170]
    f = TestFunction.plane_wave(k)
    q = sample(f, lat257).real
    p = sample(f, lat257).imag
    x = np.arange(4 * 257) * 0.25
    dphi = f.derivative(x, 1).real
    quad = -0.25 * np.sum(reconstruct(p, x) * dphi)
    P = build_total_momentum(1.0, 257)
    assert P.evaluate(q, p) == pytest.approx(quad, rel=1e-8)


@given(st.floats(0.0, 0.99), st.integers(0, 1000))
def test_momentum_independent_of_lattice_offset(b_new, seed):
    rng = np.random.default_rng(seed)
    lat = Lattice(1.0, 0.0, 65)
    q = sample(random_test_function(rng, lat, 6, 0.9), lat)
    p = sample(random_test_function(rng, lat, 6, 0.9), lat)
    P = build_total_momentum(1.0, 65)
    assert abs(P.evaluate(resample(q, b_new), resample(p, b_new)) - P.evaluate(q, p)) < 1e-9


def test_even_periodic_momentum_rejected():
    with pytest.raises(ValueError):
        build_total_momentum(1.0, 256)


def test_truncated_momentum_builds():
    P = build_total_momentum(1.0, 20, "truncated")
    assert P.D.shape == (20, 20)
    assert np.array_equal(P.D.T, -P.D)


# --- phase-space commutator ------------------------------------------------------------

def test_self_commutator_vanishes(rng):
    A = to_phase_space_form(random_quadratic_hamiltonian(rng, 1.0, 15, half_width=4))
    c = quadratic_commutator(A, A)
    assert c.max_abs == 0.0


def test_commutator_matches_poisson_bracket(rng):
    # kernel of -i[A, B] is the classical bracket {a, b} with a = z^T A z
    n = 5
    A = PhaseSpaceForm(rng.normal(size=(2 * n, 2 * n)), Lattice(1.0, 0.0, n))
    B = PhaseSpaceForm(rng.normal(size=(2 * n, 2 * n)), Lattice(1.0, 0.0, n))
    z = rng.normal(size=2 * n)
    grad_a, grad_b = 2 * A.matrix @ z, 2 * B.matrix @ z
    bracket = grad_a @ symplectic_form(n) @ grad_b
    c = quadratic_commutator(A, B)
    assert z @ c.kernel.matrix @ z == pytest.approx(bracket, rel=1e-12)
    assert abs(c.scalar) < 1e-12


def test_commutator_dimension_mismatch():
    a = to_phase_space_form(build_harmonic_chain(1.0, 1.0, 1.0, 5))
    b = to_phase_space_form(build_harmonic_chain(1.0, 1.0, 1.0, 7))
    with pytest.raises(ValueError):
        quadratic_commutator(a, b)


@pytest.mark.parametrize("builder", [build_bandlimited_kg, build_harmonic_chain])
def test_builders_conserve_momentum(builder):
    H = builder(1.0, 1.0, 1.0, 257) if builder is build_harmonic_chain else builder(1.0, 1.0, 257)
    c = quadratic_commutator(to_phase_space_form(H), build_total_momentum(1.0, 257))
    assert c.max_abs < 1e-10
    assert abs(c.scalar) < 1e-10


@given(st.integers(0, 2**31 - 1))
def test_random_quadratic_models_conserve_momentum(seed):
    H = random_quadratic_hamiltonian(np.random.default_rng(seed), 1.0, 61)
    c = quadratic_commutator(to_phase_space_form(H), build_total_momentum(1.0, 61))
    assert c.max_abs < 1e-10


def test_site_dependent_model_breaks_conservation(rng):
    # a position-dependent mass term is not translation invariant
    H = build_harmonic_chain(1.0, 1.0, 1.0, 31)
    A = to_phase_space_form(H).matrix.copy()
    A[0, 0] += 0.3
    c = quadratic_commutator(PhaseSpaceForm(A, H.lattice), build_total_momentum(1.0, 31))
    assert c.max_abs > 1e-3


# --- Fock oracle -------------------------------------------------------------------------

@pytest.mark.parametrize("builder", ["kg", "chain"])
def test_fock_oracle_quadratic(builder):
    H = build_bandlimited_kg(1.0, 1.0, 3) if builder == "kg" else build_harmonic_chain(1.0, 1.0, 1.0, 3)
    assert fock_oracle_commutator(H, build_total_momentum(1.0, 3), 5) < 1e-8


def test_fock_oracle_cubic():
    H = build_bandlimited_kg(1.0, 1.0, 3)
    assert fock_oracle_commutator(H, build_total_momentum(1.0, 3), 5, cubic=0.1) > 1e-3


def test_fock_and_phase_space_verdicts_agree(rng):
    P3 = build_total_momentum(1.0, 3)
    models = [build_bandlimited_kg(0.5, 1.0, 3), build_harmonic_chain(2.0, 0.5, 1.0, 3)]
    models += [random_quadratic_hamiltonian(rng, 1.0, 3, half_width=1) for _ in range(5)]
    for H in models:
        kernel_ok = quadratic_commutator(to_phase_space_form(H), P3).max_abs < 1e-10
        fock_ok = fock_oracle_commutator(H, P3, 5) < 1e-8
        assert kernel_ok and fock_ok
    A = to_phase_space_form(models[0]).matrix.copy()
    A[0, 0] += 0.5
    broken = PhaseSpaceForm(A, models[0].lattice)
    assert quadratic_commutator(broken, P3).max_abs > 1e-3


def test_fock_oracle_resource_guard():
    H = build_harmonic_chain(1.0, 1.0, 1.0, 7)
    with pytest.raises(ValueError):
        fock_oracle_commutator(H, build_total_momentum(1.0, 7), 6)


# --- translations ------------------------------------------------------------------------

def test_zero_translation_is_identity(lat257, rng):
    f = SampledField(lat257, rng.normal(size=257))
    assert np.array_equal(translate_field(f, 0.0).values, f.values)


@pytest.mark.parametrize("shift", [1, 2, -3])
def test_whole_site_translation_is_roll(rng, shift):
    lat = Lattice(0.5, 0.0, 33)
    f = SampledField(lat, rng.normal(size=33))
    assert np.array_equal(translate_field(f, shift * 0.5).values, f.roll(shift).values)


def test_half_step_plane_wave(lat257):
    k = lattice_momenta(lat257)[200]
    f = TestFunction.plane_wave(k)
    out = translate_field(sample(f, lat257), 0.5)
    assert np.max(np.abs(out.values - sample(f.shifted(0.5), lat257).values)) < 1e-10


@given(st.floats(-40, 40), st.floats(-40, 40), st.integers(0, 1000))
def test_translation_group_law(a, b, seed):
    rng = np.random.default_rng(seed)
    lat = Lattice(1.0, 0.0, 65)
    f = sample(random_test_function(rng, lat, 6, 0.9), lat)
    lhs = translate_field(translate_field(f, a), b)
    rhs = translate_field(f, a + b)
    assert np.max(np.abs(lhs.values - rhs.values)) < 1e-9


@given(st.floats(-40, 40), st.integers(0, 1000))
def test_translation_inverse(a, seed):
    rng = np.random.default_rng(seed)
    lat = Lattice(1.0, 0.0, 65)
    f = sample(random_test_function(rng, lat, 6, 0.9), lat)
    back = translate_field(translate_field(f, a), -a)
    assert np.max(np.abs(back.values - f.values)) < 1e-8


@given(st.integers(0, 1000))
def test_generator_is_minus_derivative(seed):
    rng = np.random.default_rng(seed)
    lat = Lattice(1.0, 0.0, 65)
    f = sample(random_test_function(rng, lat, 6, 0.9), lat)
    gen = translation_generator(f)
    dq = apply(derivative_kernel(1.0, "periodic", 65), f)
    assert np.max(np.abs(gen.values + dq.values)) < 1e-8


# --- cubic witness ------------------------------------------------------------------------

def test_witness_of_constant_field():
    # D annihilates constants; only FFT round-off remains
    assert abs(cubic_witness(SampledField(Lattice(1.0, 0.0, 31), np.full(31, 1.3)))) < 1e-14


def test_witness_of_even_field(rng):
    n = 33
    half = rng.normal(size=n // 2 + 1)
    q = np.concatenate([half, half[1:][::-1]])  # q_j = q_{-j}
    assert abs(cubic_witness(SampledField(Lattice(1.0, 0.0, n), q))) < 1e-12


def test_witness_is_generically_nonzero(lat257):
    # with phases and q^3 reaching past the band, the sum no longer telescopes to zero
    x = lat257.points()
    k = lattice_momenta(lat257)[128 + 80]
    q = SampledField(lat257, np.cos(k * x + 0.7) + 0.3 * np.cos(2 * k * x + 1.2))
    assert abs(cubic_witness(q)) > 1e-2


def test_witness_vanishes_for_cosines_about_origin(lat257):
    # cos(kx) + 0.3 cos(2kx) is even about site 0, so the witness cancels exactly
    x = lat257.points()
    k = lattice_momenta(lat257)[128 + 80]
    q = SampledField(lat257, np.cos(k * x) + 0.3 * np.cos(2 * k * x))
    assert abs(cubic_witness(q)) < 1e-10


def test_witness_is_the_bracket(rng):
    # {sum q^3, P} by finite differences of P along the flow of sum q^3
    lat = Lattice(1.0, 0.0, 17)
    q = rng.normal(size=17)
    P = build_total_momentum(1.0, 17)
    # dP/dt under H = sum q^3: dq/dt = 0, dp/dt = -3 q^2
    dP = -(-3 * q**2) @ (P.D @ q)
    assert cubic_witness(SampledField(lat, q)) == pytest.approx(-dP, rel=1e-12)


# --- classical flow -----------------------------------------------------------------------

@pytest.fixture(scope="module")
def flow_state():
    lat = Lattice(1.0, 0.0, 129)
    return random_flow_state(lat, np.random.default_rng(7))


def test_flow_state_energy_normalised(flow_state):
    q, p = flow_state
    H = build_bandlimited_kg(1.0, 1.0, 129)
    assert energy(H, q, p) == pytest.approx(20.0, rel=1e-12)


def test_exact_flow_matches_normal_modes(flow_state):
    # oracle: evolve each Fourier mode analytically with omega^2 = k^2 + m^2
    q, p = flow_state
    H = build_bandlimited_kg(1.0, 1.0, 129)
    traj = classical_flow(H, q, p, t_final=2.0, steps=20)
    # with H = (1/2)(p^2 + q(-D2 + m^2)q) in dx=1 units: q' = p, p' = -(k^2+m^2) q mode by mode
    qh, ph = np.fft.fft(q.values), np.fft.fft(p.values)
    k = 2 * np.pi * np.fft.fftfreq(129)
    w = np.sqrt(k**2 + 1.0)
    t = 2.0
    q_t = np.fft.ifft(qh * np.cos(w * t) + ph * np.sin(w * t) / w).real
    assert np.max(np.abs(traj.q[-1] - q_t)) < 1e-10


@pytest.mark.parametrize("model", ["kg", "chain"])
def test_exact_flow_conserves_momentum(flow_state, model):
    q, p = flow_state
    H = build_bandlimited_kg(1.0, 1.0, 129) if model == "kg" else build_harmonic_chain(1.0, 1.0, 1.0, 129)
    traj = classical_flow(H, q, p, t_final=10.0, steps=200)
    assert traj.momentum_drift < 1e-9
    assert traj.energy_drift < 1e-9 * abs(traj.energy[0])


@pytest.mark.slow
def test_cubic_flow_moves_momentum(flow_state):
    q, p = flow_state
    H = build_bandlimited_kg(1.0, 1.0, 129)
    traj = classical_flow(H, q, p, t_final=10.0, steps=100_000, cubic=0.1)
    assert traj.momentum_drift > 1e-3
    assert traj.energy_drift < 1e-6


def test_cubic_step_guard(flow_state):
    q, p = flow_state
    with pytest.raises(ValueError):
        classical_flow(build_bandlimited_kg(1.0, 1.0, 129), 100 * q, p, steps=10, cubic=0.1)


def test_flow_rejects_truncated():
    H = build_harmonic_chain(1.0, 1.0, 1.0, 8, "truncated")
    z = np.zeros(8)
    with pytest.raises(ValueError):
        classical_flow(H, z, z)


def test_trajectory_export(tmp_path, flow_state):
    q, p = flow_state
    traj = classical_flow(build_harmonic_chain(1.0, 1.0, 1.0, 129), q, p, t_final=1.0, steps=10)
    assert isinstance(traj, Trajectory)
    files = traj.save(tmp_path, "run", snapshot_stride=5)
    assert files[0].read_text().splitlines()[0] == "t,energy,momentum"
    assert len(files[0].read_text().splitlines()) == 12
    assert len(files) == 1 + 3
    assert files[1].read_text().splitlines()[0] == "j,x,q,p"


# --- report ----------------------------------------------------------------------------

def test_report_for_zero_coupling_equals_quadratic(flow_state):
    H = build_bandlimited_kg(1.0, 1.0, 129)
    a = conservation_report(H, flow_state=flow_state, steps=50)
    b = conservation_report(H, cubic=0.0, flow_state=flow_state, steps=50)
    assert a == b
    assert {"hamiltonian", "kernel_residual", "fock_residual", "flow_drift"} <= set(a)


def test_report_json(tmp_path):
    rep = conservation_report(build_harmonic_chain(1.0, 1.0, 1.0, 33))
    save_report(tmp_path / "r.json", rep)
    text = (tmp_path / "r.json").read_text()
    assert '"flow_drift": null' in text
    assert rep["kernel_residual"] < 1e-10 and rep["fock_residual"] < 1e-8
