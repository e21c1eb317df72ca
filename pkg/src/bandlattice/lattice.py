"""Uniform 1D lattices, bandlimited test functions, and Shannon reconstruction.

A lattice of spacing ``dx`` carries every function whose spectrum lies in the
open band ``(-pi/dx, pi/dx)``.  Two boundary modes are supported:

* ``periodic`` -- samples live on a circle of circumference ``n * dx`` and the
  interpolation kernel is the periodized sinc (Dirichlet kernel).  All
  identities hold to rounding for trigonometric content.
* ``truncated`` -- the literal sinc sum over the ``n`` available samples; values
  outside ``0..n-1`` are treated as zero, so results near the edges are
  contaminated.
"""

from __future__ import annotations

import csv
import enum
import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "Boundary",
    "EdgeContaminationWarning",
    "Lattice",
    "SampledField",
    "TestFunction",
    "sinc_pi",
    "periodic_sinc",
    "lattice_momenta",
    "random_test_function",
    "sample",
    "reconstruct",
    "resample",
    "integrate_product",
    "save_field",
    "load_field",
]


class Boundary(str, enum.Enum):
    PERIODIC = "periodic"
    TRUNCATED = "truncated"


class EdgeContaminationWarning(UserWarning):
    """Reconstruction point lies within the untrusted edge margin of a truncated lattice."""


_SNAP_ULPS = 8.0


@dataclass(frozen=True)
class Lattice:
    """Uniform grid ``x_j = j * spacing + offset`` with ``size`` sites."""

    spacing: float = 1.0
    offset: float = 0.0
    size: int = 257
    boundary: Boundary = Boundary.PERIODIC

    def __post_init__(self):
        object.__setattr__(self, "boundary", Boundary(self.boundary))
        if not self.spacing > 0:
            raise ValueError(f"spacing must be positive, got {self.spacing}")
        if not 0 <= self.offset < self.spacing:
            raise ValueError(f"offset must lie in [0, spacing), got {self.offset}")
        if int(self.size) != self.size or self.size < 1:
            raise ValueError(f"size must be a positive integer, got {self.size}")
        object.__setattr__(self, "size", int(self.size))

    @property
    def bandlimit(self) -> float:
        return math.pi / self.spacing

    @property
    def period(self) -> float:
        return self.size * self.spacing

    @property
    def is_periodic(self) -> bool:
        return self.boundary is Boundary.PERIODIC

    def point(self, j):
        return np.asarray(j) * self.spacing + self.offset

    def points(self) -> np.ndarray:
        return self.point(np.arange(self.size))

    def with_offset(self, offset: float) -> "Lattice":
        return Lattice(self.spacing, offset, self.size, self.boundary)

    def compatible(self, other: "Lattice") -> bool:
        return (
            self.spacing == other.spacing
            and self.size == other.size
            and self.boundary is other.boundary
        )

    def to_dict(self) -> dict:
        return {"dx": self.spacing, "b": self.offset, "n": self.size, "boundary": self.boundary.value}

    @classmethod
    def from_dict(cls, d: dict) -> "Lattice":
        return cls(float(d["dx"]), float(d.get("b", 0.0)), int(d["n"]), Boundary(d.get("boundary", "periodic")))


@dataclass(frozen=True, eq=False)
class SampledField:
    """Field amplitudes on a lattice (real or complex)."""

    lattice: Lattice
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, copy=True)
        if values.dtype.kind not in "fc":
            values = values.astype(float)
        if values.shape != (self.lattice.size,):
            raise ValueError(
                f"expected {self.lattice.size} values, got array of shape {values.shape}"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.lattice.size

    def __add__(self, other: "SampledField") -> "SampledField":
        _require_same_lattice(self, other)
        return SampledField(self.lattice, self.values + other.values)

    def __sub__(self, other: "SampledField") -> "SampledField":
        _require_same_lattice(self, other)
        return SampledField(self.lattice, self.values - other.values)

    def __mul__(self, scalar) -> "SampledField":
        return SampledField(self.lattice, scalar * self.values)

    __rmul__ = __mul__

    @property
    def real(self) -> "SampledField":
        return SampledField(self.lattice, self.values.real.copy())

    @property
    def imag(self) -> "SampledField":
        return SampledField(self.lattice, self.values.imag.copy())

    def roll(self, shift: int) -> "SampledField":
        """Cyclic index shift: new[j] = old[j - shift]."""
        return SampledField(self.lattice, np.roll(self.values, shift))

    @classmethod
    def zeros(cls, lattice: Lattice, dtype=float) -> "SampledField":
        return cls(lattice, np.zeros(lattice.size, dtype=dtype))

    @classmethod
    def kronecker(cls, lattice: Lattice, site: int = 0) -> "SampledField":
        v = np.zeros(lattice.size)
        v[site] = 1.0
        return cls(lattice, v)


def _require_same_lattice(f: SampledField, g: SampledField):
    if f.lattice != g.lattice:
        raise ValueError(f"lattice mismatch: {f.lattice} vs {g.lattice}")


class _Kind(str, enum.Enum):
    PLANE_WAVE = "plane_wave"
    FOURIER_SUM = "fourier_sum"
    SINC_PULSE = "sinc_pulse"


@dataclass(frozen=True)
class TestFunction:
    """Closed-form bandlimited function.

    Fourier kinds evaluate ``sum_n a_n * exp(-i k_n x)``; with ``real=True`` the
    real part is returned, which is itself bandlimited with the same support.
    A sinc pulse is ``sinc_pi((x - center) / width)`` and has spectral support
    ``[-pi/width, pi/width]``.
    """

    __test__ = False  # not a pytest class

    kind: _Kind
    components: tuple = ()
    center: float = 0.0
    width: float = 1.0
    real: bool = False

    @classmethod
    def plane_wave(cls, k: float, amplitude: complex = 1.0, real: bool = False) -> "TestFunction":
        return cls(_Kind.PLANE_WAVE, ((float(k), complex(amplitude)),), real=real)

    @classmethod
    def fourier_sum(cls, components: Sequence[tuple[float, complex]], real: bool = False) -> "TestFunction":
        comps = tuple((float(k), complex(a)) for k, a in components)
        return cls(_Kind.FOURIER_SUM, comps, real=real)

    @classmethod
    def sinc_pulse(cls, center: float, width: float = 1.0) -> "TestFunction":
        if width <= 0:
            raise ValueError("sinc pulse width must be positive")
        return cls(_Kind.SINC_PULSE, (), center=float(center), width=float(width), real=True)

    @property
    def max_wavenumber(self) -> float:
        if self.kind is _Kind.SINC_PULSE:
            return math.pi / self.width
        return max((abs(k) for k, _ in self.components), default=0.0)

    def shifted(self, a: float) -> "TestFunction":
        """The translated function x -> f(x - a)."""
        if self.kind is _Kind.SINC_PULSE:
            return TestFunction(self.kind, (), self.center + a, self.width, self.real)
        comps = tuple((k, amp * np.exp(1j * k * a)) for k, amp in self.components)
        return TestFunction(self.kind, comps, real=self.real)

    def __call__(self, x):
        return self.derivative(x, 0)

    def derivative(self, x, order: int = 1):
        x = np.asarray(x, dtype=float)
        if self.kind is _Kind.SINC_PULSE:
            if order != 0:
                raise NotImplementedError("analytic derivatives are provided for Fourier kinds only")
            return sinc_pi((x - self.center) / self.width)
        out = np.zeros(x.shape, dtype=complex)
        for k, amp in self.components:
            out = out + amp * (-1j * k) ** order * np.exp(-1j * k * x)
        return out.real if self.real else out


def sinc_pi(x):
    """Normalized sinc ``sin(pi x) / (pi x)``, exactly 1 at 0 and exactly 0 at other integers."""
    x = np.asarray(x, dtype=float)
    on_int = x == np.rint(x)
    out = np.where(on_int, (x == 0).astype(float), np.sinc(np.where(on_int, 0.5, x)))
    return out[()] if out.ndim == 0 else out


def periodic_sinc(u, n: int):
    """Periodized sinc on a circle of ``n`` sites (argument in lattice units).

    Odd ``n`` gives the Dirichlet kernel ``sin(pi u) / (n sin(pi u / n))``; even
    ``n`` uses ``sin(pi u) / (n tan(pi u / n))``, which splits the Nyquist mode
    as a cosine.  Both equal the Kronecker delta (mod ``n``) on integers.
    """
    u = np.asarray(u, dtype=float)
    u = u - n * np.rint(u / n)
    on_int = u == np.rint(u)
    safe = np.where(on_int, 0.5, u)
    if n % 2:
        val = np.sin(np.pi * safe) / (n * np.sin(np.pi * safe / n))
    else:
        val = np.sin(np.pi * safe) / (n * np.tan(np.pi * safe / n))
    out = np.where(on_int, (u == 0).astype(float), val)
    return out[()] if out.ndim == 0 else out


def lattice_momenta(lattice: Lattice) -> np.ndarray:
    """Wavenumbers ``2 pi n / (N dx)`` strictly inside the band, ascending."""
    n = lattice.size
    idx = np.arange(-(n // 2), n - n // 2)
    k = 2 * np.pi * idx / lattice.period
    return k[np.abs(k) < lattice.bandlimit * (1 - 1e-12)]


def random_test_function(
    rng: np.random.Generator,
    lattice: Lattice,
    n_components: int = 6,
    kmax_fraction: float = 0.9,
    real: bool = True,
) -> TestFunction:
    """Random Fourier sum of lattice momenta with ``|k| <= kmax_fraction * bandlimit``."""
    k = lattice_momenta(lattice)
    k = k[np.abs(k) <= kmax_fraction * lattice.bandlimit]
    picks = rng.choice(k, size=min(n_components, k.size), replace=False)
    amps = rng.normal(size=picks.size) + 1j * rng.normal(size=picks.size)
    return TestFunction.fourier_sum(list(zip(picks, amps / np.sqrt(picks.size))), real=real)


def sample(f: TestFunction, lattice: Lattice) -> SampledField:
    """Evaluate ``f`` at the lattice points."""
    if f.kind is _Kind.SINC_PULSE:
        if f.max_wavenumber > lattice.bandlimit * (1 + 1e-12):
            raise ValueError(
                f"sinc pulse of width {f.width} exceeds the bandlimit of spacing {lattice.spacing}"
            )
    elif f.max_wavenumber >= lattice.bandlimit:
        raise ValueError(
            f"component |k|={f.max_wavenumber} is not strictly below the bandlimit {lattice.bandlimit}"
        )
    if lattice.is_periodic and f.kind is not _Kind.SINC_PULSE:
        base = 2 * np.pi / lattice.period
        for k, _ in f.components:
            if abs(k / base - round(k / base)) > 1e-9:
                warnings.warn(
                    f"wavenumber {k} is not periodic on a circle of length {lattice.period}; "
                    "periodic reconstruction will not reproduce it",
                    stacklevel=2,
                )
    return SampledField(lattice, f(lattice.points()))


def _snap(s: np.ndarray) -> np.ndarray:
    r = np.rint(s)
    tol = _SNAP_ULPS * np.finfo(float).eps * np.maximum(1.0, np.abs(s))
    return np.where(np.abs(s - r) <= tol, r, s)


def _kahan_rows(terms: np.ndarray) -> np.ndarray:
    """Compensated sum over axis 1 in ascending column order."""
    total = np.zeros(terms.shape[0], dtype=terms.dtype)
    comp = np.zeros_like(total)
    for j in range(terms.shape[1]):
        y = terms[:, j] - comp
        t = total + y
        comp = (t - total) - y
        total = t
    return total


def _kahan(values: np.ndarray) -> complex | float:
    return _kahan_rows(np.asarray(values)[None, :])[0]


def _interpolate(field: SampledField, s: np.ndarray, *, warn: bool = True) -> np.ndarray:
    """Reconstruct at positions ``s`` given in lattice units ``(x - b) / dx``."""
    lat = field.lattice
    s = _snap(np.atleast_1d(np.asarray(s, dtype=float)))
    u = s[:, None] - np.arange(lat.size)[None, :]
    if lat.is_periodic:
        kern = periodic_sinc(u, lat.size)
    else:
        if warn:
            margin = lat.size / 8
            if np.any((s < margin) | (s > lat.size - 1 - margin)):
                warnings.warn(
                    f"reconstruction within {margin:g} sites of a truncated lattice edge",
                    EdgeContaminationWarning,
                    stacklevel=3,
                )
        kern = sinc_pi(u)
    return _kahan_rows(kern * field.values[None, :])


def reconstruct(field: SampledField, x):
    """Shannon reconstruction of ``field`` at position(s) ``x``."""
    scalar = np.ndim(x) == 0
    lat = field.lattice
    out = _interpolate(field, (np.asarray(x, dtype=float) - lat.offset) / lat.spacing)
    return out[0] if scalar else out.reshape(np.shape(x))


def resample(field: SampledField, new_offset: float) -> SampledField:
    """Samples of the same continuous field on the lattice shifted to ``new_offset``."""
    lat = field.lattice
    if not 0 <= new_offset < lat.spacing:
        raise ValueError(f"new offset must lie in [0, {lat.spacing}), got {new_offset}")
    if new_offset == lat.offset:
        return SampledField(lat.with_offset(new_offset), field.values)
    delta = (new_offset - lat.offset) / lat.spacing
    values = _interpolate(field, np.arange(lat.size) + delta, warn=False)
    return SampledField(lat.with_offset(new_offset), values)


def integrate_product(f: SampledField, g: SampledField):
    """``dx * sum conj(f_j) g_j`` -- the exact integral of the product of the reconstructions."""
    _require_same_lattice(f, g)
    return f.lattice.spacing * _kahan(np.conj(f.values) * g.values)


def _sidecar(path: Path) -> Path:
    return path.with_suffix(".json")


def save_field(path, field: SampledField) -> None:
    """Write ``j,x,value_re,value_im`` CSV plus a JSON lattice sidecar."""
    path = Path(path)
    xs = field.lattice.points()
    vals = field.values.astype(complex)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["j", "x", "value_re", "value_im"])
        for j in range(field.lattice.size):
            w.writerow([j, repr(float(xs[j])), repr(float(vals[j].real)), repr(float(vals[j].imag))])
    _sidecar(path).write_text(json.dumps(field.lattice.to_dict(), sort_keys=True) + "\n")


def load_field(path) -> SampledField:
    path = Path(path)
    lattice = Lattice.from_dict(json.loads(_sidecar(path).read_text()))
    re, im = [], []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            re.append(float(row["value_re"]))
            im.append(float(row["value_im"]))
    values = np.array(re) + 1j * np.array(im)
    if not np.any(values.imag):
        values = values.real
    return SampledField(lattice, values)
