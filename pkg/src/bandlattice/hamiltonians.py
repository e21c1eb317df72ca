"""Translation-invariant quadratic lattice Hamiltonians.

Every model shares one data layout,

    H = sum_j sum_m ( c_qq[m] q_j q_{j+m} + c_qp[m] q_j p_{j+m} + c_pp[m] p_j p_{j+m} ),

with the coefficient arrays centred at ``m = 0`` (index ``m + W``).  Periodic
lattices wrap ``j + m`` mod ``N``; truncated lattices drop out-of-range terms.
Units have hbar = 1.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .lattice import Boundary, Lattice, SampledField, reconstruct
from .operators import second_derivative_kernel

__all__ = [
    "QuadraticLatticeHamiltonian",
    "PhaseSpaceForm",
    "DispersionCurve",
    "build_bandlimited_kg",
    "build_harmonic_chain",
    "random_quadratic_hamiltonian",
    "hamiltonian_from_spec",
    "energy",
    "lift_energy_continuum",
    "to_phase_space_form",
    "dispersion",
    "dispersion_eigen",
    "save_dispersion",
]


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class QuadraticLatticeHamiltonian:
    lattice: Lattice
    c_qq: np.ndarray
    c_qp: np.ndarray
    c_pp: np.ndarray
    label: str = ""
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        arrays = [np.asarray(c, dtype=float) for c in (self.c_qq, self.c_qp, self.c_pp)]
        for a in arrays:
            if a.ndim != 1 or a.size % 2 == 0:
                raise ValueError("coefficient arrays must be 1D with odd length (centred at m = 0)")
            if np.iscomplexobj(a):
                raise ValueError("coefficients must be real")
        W = max(a.size for a in arrays) // 2
        padded = [np.pad(a, W - a.size // 2) for a in arrays]
        for name, a in zip(("c_qq", "c_qp", "c_pp"), padded):
            object.__setattr__(self, name, _frozen(a))

    @property
    def half_width(self) -> int:
        return self.c_qq.size // 2

    @property
    def spacing(self) -> float:
        return self.lattice.spacing

    @property
    def size(self) -> int:
        return self.lattice.size


@dataclass(frozen=True, eq=False)
class PhaseSpaceForm:
    """Symmetric ``2N x 2N`` kernel ``A`` over ``z = (q_1..q_N, p_1..p_N)``.

    The classical observable is the contraction ``z^T A z``; as an operator it
    is the symmetrically ordered ``sum_ab A_ab z_a z_b``.
    """

    matrix: np.ndarray
    lattice: Lattice

    def __post_init__(self):
        A = np.array(self.matrix, dtype=float)
        n = self.lattice.size
        if A.shape != (2 * n, 2 * n):
            raise ValueError(f"expected a {(2 * n, 2 * n)} matrix, got {A.shape}")
        A = 0.5 * (A + A.T)
        A.setflags(write=False)
        object.__setattr__(self, "matrix", A)

    @property
    def n(self) -> int:
        return self.lattice.size

    @property
    def qq(self) -> np.ndarray:
        return self.matrix[: self.n, : self.n]

    @property
    def qp(self) -> np.ndarray:
        return self.matrix[: self.n, self.n:]

    @property
    def pp(self) -> np.ndarray:
        return self.matrix[self.n:, self.n:]

    def evaluate(self, q, p) -> float:
        z = np.concatenate([_values(q), _values(p)])
        return float(z @ self.matrix @ z)


@dataclass(frozen=True)
class DispersionCurve:
    k: np.ndarray
    omega2: np.ndarray

    def __len__(self):
        return self.k.size


def _check_periodic_size(n: int, boundary: Boundary):
    if boundary is Boundary.PERIODIC and n % 2 == 0:
        raise ValueError(f"periodic models need an odd number of sites, got {n}")


def build_bandlimited_kg(mass: float = 1.0, dx: float = 1.0, n: int = 257, boundary="periodic"):
    """Exact lattice form of the bandlimited free Klein-Gordon field.

    ``H = 1/(2 dx) sum_j [p_j^2 + (pi^2/3 + dx^2 m^2) q_j^2 + sum_{n!=0} 2(-1)^n/n^2 q_j q_{j+n}]``
    on the infinite lattice.  Periodic mode uses the periodized second
    derivative, which adds image contributions to every coefficient.
    """
    boundary = Boundary(boundary)
    if mass < 0:
        raise ValueError(f"mass must be non-negative, got {mass}")
    _check_periodic_size(n, boundary)
    lat = Lattice(dx, 0.0, n, boundary)
    extent = n if boundary is Boundary.PERIODIC else max(n - 1, 1)
    d2 = second_derivative_kernel(dx, boundary, extent).coefficients
    W = d2.size // 2
    c_qq = -0.5 * dx * d2
    c_qq[W] += 0.5 * dx * mass**2
    c_pp = np.zeros_like(c_qq)
    c_pp[W] = 1.0 / (2 * dx)
    return QuadraticLatticeHamiltonian(
        lat, c_qq, np.zeros_like(c_qq), c_pp, label="klein_gordon", params={"mass": mass},
    )


def build_harmonic_chain(
    particle_mass: float = 1.0, spring: float = 1.0, dx: float = 1.0, n: int = 257, boundary="periodic"
):
    """``H = sum_j p_j^2/(2M) + (k/2)(q_{j+1} - q_j)^2`` in expanded nearest-neighbour form."""
    boundary = Boundary(boundary)
    if particle_mass <= 0 or spring <= 0:
        raise ValueError("particle mass and spring constant must be positive")
    _check_periodic_size(n, boundary)
    lat = Lattice(dx, 0.0, n, boundary)
    c_qq = np.array([-spring / 2, spring, -spring / 2])
    c_pp = np.array([0.0, 1.0 / (2 * particle_mass), 0.0])
    return QuadraticLatticeHamiltonian(
        lat, c_qq, np.zeros(3), c_pp, label="harmonic_chain",
        params={"particle_mass": particle_mass, "spring": spring},
    )


def random_quadratic_hamiltonian(
    rng: np.random.Generator, dx: float = 1.0, n: int = 257, boundary="periodic", half_width: int = 12
):
    """Random translation-invariant quadratic model with ``|c[m]| <= 1/max(1,|m|)^3`` in all three blocks."""
    boundary = Boundary(boundary)
    _check_periodic_size(n, boundary)
    m = np.arange(-half_width, half_width + 1)
    env = 1.0 / np.maximum(1, np.abs(m)) ** 3
    c = [rng.uniform(-1, 1, size=m.size) * env for _ in range(3)]
    return QuadraticLatticeHamiltonian(Lattice(dx, 0.0, n, boundary), *c, label="random_quadratic")


def hamiltonian_from_spec(spec: dict) -> QuadraticLatticeHamiltonian:
    """Build from ``{type, params, dx, n, boundary}``."""
    kind = spec["type"]
    params = dict(spec.get("params", {}))
    common = dict(dx=float(spec.get("dx", 1.0)), n=int(spec.get("n", 257)), boundary=spec.get("boundary", "periodic"))
    if kind in ("klein_gordon", "kg"):
        return build_bandlimited_kg(float(params.get("mass", 1.0)), **common)
    if kind in ("harmonic_chain", "chain"):
        return build_harmonic_chain(
            float(params.get("particle_mass", 1.0)), float(params.get("spring", 1.0)), **common
        )
    if kind == "random_quadratic":
        rng = np.random.default_rng(int(params.get("seed", 0)))
        return random_quadratic_hamiltonian(rng, half_width=int(params.get("half_width", 12)), **common)
    raise ValueError(f"unknown hamiltonian type {kind!r}")


def _values(f) -> np.ndarray:
    return f.values if isinstance(f, SampledField) else np.asarray(f)


def _shifted(b: np.ndarray, m: int, periodic: bool) -> np.ndarray:
    """Array whose j-th entry is ``b[j + m]`` (zero outside a truncated lattice)."""
    if periodic:
        return np.roll(b, -m)
    out = np.zeros_like(b)
    n = b.size
    if m >= 0:
        out[: max(n - m, 0)] = b[m:]
    else:
        out[-m:] = b[: n + m]
    return out


def _pair_sum(c: np.ndarray, a: np.ndarray, b: np.ndarray, periodic: bool):
    W = c.size // 2
    total = 0.0
    for m in range(-W, W + 1):
        if c[m + W] != 0:
            total += c[m + W] * np.dot(a, _shifted(b, m, periodic))
    return total


def energy(H: QuadraticLatticeHamiltonian, q, p):
    """Classical value of ``H`` on the configuration ``(q, p)``."""
    for f in (q, p):
        if isinstance(f, SampledField) and not H.lattice.compatible(f.lattice):
            raise ValueError("field lattice does not match the Hamiltonian")
    qv, pv = _values(q), _values(p)
    if qv.shape != (H.size,) or pv.shape != (H.size,):
        raise ValueError(f"fields must have {H.size} sites")
    per = H.lattice.is_periodic
    return (
        _pair_sum(H.c_qq, qv, qv, per)
        + _pair_sum(H.c_qp, qv, pv, per)
        + _pair_sum(H.c_pp, pv, pv, per)
    )


def _block(c: np.ndarray, n: int, periodic: bool) -> np.ndarray:
    """``B[j, j+m] = c[m]`` summed over all ``m`` (wrapped or clipped)."""
    W = c.size // 2
    B = np.zeros((n, n))
    j = np.arange(n)
    for m in range(-W, W + 1):
        if c[m + W] == 0:
            continue
        col = j + m
        if periodic:
            np.add.at(B, (j, col % n), c[m + W])
        else:
            ok = (col >= 0) & (col < n)
            B[j[ok], col[ok]] += c[m + W]
    return B


def to_phase_space_form(H: QuadraticLatticeHamiltonian) -> PhaseSpaceForm:
    """Symmetric kernel ``A`` with ``energy(H, q, p) == z^T A z``."""
    n, per = H.size, H.lattice.is_periodic
    Bqq = _block(H.c_qq, n, per)
    Bqp = _block(H.c_qp, n, per)
    Bpp = _block(H.c_pp, n, per)
    A = np.block([[0.5 * (Bqq + Bqq.T), 0.5 * Bqp], [0.5 * Bqp.T, 0.5 * (Bpp + Bpp.T)]])
    return PhaseSpaceForm(A, H.lattice)


def _harmonic_chain_params(H: QuadraticLatticeHamiltonian) -> tuple[float, float]:
    if H.label != "harmonic_chain":
        raise ValueError("continuum lift is defined for harmonic-chain Hamiltonians")
    return H.params["particle_mass"], H.params["spring"]


def lift_energy_continuum(H: QuadraticLatticeHamiltonian, q: SampledField, p: SampledField, quadrature_points: int):
    """Energy of the Shannon-lifted harmonic chain by periodic quadrature.

    Integrates ``(1/2) [dx pi(x)^2 / M + (k/dx) (phi(x + dx) - phi(x))^2]`` over
    one period, with ``phi`` and ``pi = p / dx`` reconstructed from the samples.
    """
    particle_mass, spring = _harmonic_chain_params(H)
    lat = H.lattice
    if not lat.is_periodic:
        raise ValueError("the continuum lift needs a periodic lattice")
    if quadrature_points < 4 * lat.size:
        raise ValueError(f"need at least {4 * lat.size} quadrature points, got {quadrature_points}")
    qf = SampledField(lat.with_offset(q.lattice.offset), q.values)
    pf = SampledField(lat.with_offset(p.lattice.offset), p.values)
    dx = lat.spacing
    x = qf.lattice.offset + lat.period * np.arange(quadrature_points) / quadrature_points
    phi = reconstruct(qf, x)
    phi_next = reconstruct(qf, x + dx)
    momentum_density = reconstruct(pf, x) / dx
    integrand = 0.5 * (dx * np.abs(momentum_density) ** 2 / particle_mass + spring / dx * np.abs(phi_next - phi) ** 2)
    # uniform rule on a full period: exact for trigonometric integrands of degree < quadrature_points
    return float(math.fsum(integrand) * lat.period / quadrature_points)


def _symbol(c: np.ndarray, k: np.ndarray, dx: float) -> np.ndarray:
    W = c.size // 2
    m = np.arange(-W, W + 1)
    return np.cos(np.multiply.outer(k, m) * dx) @ c


def dispersion(H: QuadraticLatticeHamiltonian, tol: float = 1e-12) -> DispersionCurve:
    """Normal-mode frequencies ``omega^2(k) = (2 sigma_pp(k)) (2 sigma_qq(k))``.

    ``sigma`` is the cosine symbol of each block at the lattice momenta; with
    this normalisation the Klein-Gordon model gives ``k^2 + m^2``.
    """
    lat = H.lattice
    if not lat.is_periodic:
        raise ValueError("dispersion needs a periodic lattice")
    if np.any(H.c_qp != 0):
        raise ValueError("dispersion is defined for Hamiltonians without q-p coupling")
    n = lat.size
    idx = np.arange(-(n - 1) // 2, (n - 1) // 2 + 1)
    k = 2 * np.pi * idx / lat.period
    s_qq = _symbol(H.c_qq, k, lat.spacing)
    s_pp = _symbol(H.c_pp, k, lat.spacing)
    scale = tol * max(1.0, np.max(np.abs(s_qq)), np.max(np.abs(s_pp)))
    if np.any(s_pp <= 0) or np.any(s_qq < -scale):
        raise ValueError("quadratic form is indefinite; no real dispersion relation")
    return DispersionCurve(k, 4.0 * s_pp * np.clip(s_qq, 0.0, None))


def dispersion_eigen(H: QuadraticLatticeHamiltonian) -> np.ndarray:
    """Sorted ``omega^2`` from direct diagonalisation of the phase-space dynamics.

    With ``q'' = -4 A_pp A_qq q`` the squared frequencies are the eigenvalues of
    the symmetric matrix ``4 A_pp^{1/2} A_qq A_pp^{1/2}``.
    """
    form = to_phase_space_form(H)
    if np.any(form.qp != 0):
        raise ValueError("dispersion is defined for Hamiltonians without q-p coupling")
    w, V = np.linalg.eigh(form.pp)
    if np.any(w <= 0):
        raise ValueError("momentum block is not positive definite")
    root = (V * np.sqrt(w)) @ V.T
    return np.sort(np.linalg.eigvalsh(4.0 * root @ form.qq @ root))


def save_dispersion(path, curve: DispersionCurve, expected: np.ndarray) -> None:
    """CSV ``n,k,omega2_measured,omega2_expected,abs_err``."""
    n = curve.k.size
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "k", "omega2_measured", "omega2_expected", "abs_err"])
        for i, (k, o, e) in enumerate(zip(curve.k, curve.omega2, expected)):
            w.writerow([i - (n - 1) // 2, repr(float(k)), repr(float(o)), repr(float(e)), repr(float(abs(o - e)))])


def load_hamiltonian_spec(path) -> QuadraticLatticeHamiltonian:
    return hamiltonian_from_spec(json.loads(Path(path).read_text()))
