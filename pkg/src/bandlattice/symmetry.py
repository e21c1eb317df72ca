"""Bandlimited total momentum, continuous translations, and conservation checks.

The lattice total momentum is ``P = -p^T D q`` with ``D`` the bandlimited
derivative matrix.  Conservation under a quadratic Hamiltonian is checked three
independent ways: the phase-space commutator kernel, a brute-force truncated
Fock-space commutator, and classical time evolution.
"""

from __future__ import annotations

import csv
import itertools
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import expm

from .hamiltonians import (
    PhaseSpaceForm,
    QuadraticLatticeHamiltonian,
    build_bandlimited_kg,
    energy,
    hamiltonian_from_spec,
    to_phase_space_form,
)
from .lattice import Boundary, Lattice, SampledField, _interpolate, random_test_function, sample
from .operators import apply, derivative_kernel

__all__ = [
    "TotalMomentum",
    "Commutator",
    "Trajectory",
    "symplectic_form",
    "derivative_matrix",
    "build_total_momentum",
    "quadratic_commutator",
    "fock_oracle_commutator",
    "translate_field",
    "translation_generator",
    "classical_flow",
    "random_flow_state",
    "cubic_witness",
    "conservation_report",
    "save_report",
]


def symplectic_form(n: int) -> np.ndarray:
    """``[[0, I], [-I, 0]]`` encoding ``[q_j, p_k] = i delta_jk``."""
    eye = np.eye(n)
    zero = np.zeros((n, n))
    return np.block([[zero, eye], [-eye, zero]])


def _derivative(lattice: Lattice):
    if lattice.is_periodic:
        return derivative_kernel(lattice.spacing, Boundary.PERIODIC, lattice.size)
    return derivative_kernel(lattice.spacing, Boundary.TRUNCATED, max(lattice.size - 1, 1))


def derivative_matrix(lattice: Lattice) -> np.ndarray:
    """Dense ``D`` for the lattice (circulant when periodic)."""
    return _derivative(lattice).matrix(lattice.size)


@dataclass(frozen=True, eq=False)
class TotalMomentum:
    form: PhaseSpaceForm
    D: np.ndarray

    @property
    def lattice(self) -> Lattice:
        return self.form.lattice

    def evaluate(self, q, p) -> float:
        qv = q.values if isinstance(q, SampledField) else np.asarray(q)
        pv = p.values if isinstance(p, SampledField) else np.asarray(p)
        return float(-(pv @ (self.D @ qv)))


def build_total_momentum(dx: float = 1.0, n: int = 257, boundary="periodic") -> TotalMomentum:
    """Phase-space form of ``P = -sum_ij D_ij p_i q_j``."""
    boundary = Boundary(boundary)
    if boundary is Boundary.PERIODIC and n % 2 == 0:
        raise ValueError(f"periodic total momentum needs an odd number of sites, got {n}")
    lat = Lattice(dx, 0.0, n, boundary)
    D = derivative_matrix(lat)
    zero = np.zeros((n, n))
    A = np.block([[zero, -0.5 * D.T], [-0.5 * D, zero]])
    return TotalMomentum(PhaseSpaceForm(A, lat), D)


@dataclass(frozen=True)
class Commutator:
    """``-i [A, B] = z^T kernel z + scalar`` (the Poisson-bracket kernel)."""

    kernel: PhaseSpaceForm
    scalar: complex

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.kernel.matrix)))


def quadratic_commutator(a, b) -> Commutator:
    """Commutator of two symmetrically ordered quadratic observables.

    With ``[z_a, z_b] = i Omega_ab`` one finds ``-i [A, B] = 2 z^T (A Omega B - B Omega A) z``;
    the right-hand kernel is already symmetric.  The identity part is the
    ordering constant ``(A Omega B Omega) - (B Omega A Omega)`` traced, which
    vanishes for symmetric ``A, B`` and is reported as a check.
    """
    fa = a.form if isinstance(a, TotalMomentum) else a
    fb = b.form if isinstance(b, TotalMomentum) else b
    A, B = fa.matrix, fb.matrix
    if A.shape != B.shape:
        raise ValueError(f"dimension mismatch: {A.shape} vs {B.shape}")
    Om = symplectic_form(A.shape[0] // 2)
    AOB = A @ Om @ B
    BOA = B @ Om @ A
    scalar = -1j * (np.trace(AOB @ Om) - np.trace(BOA @ Om))
    return Commutator(PhaseSpaceForm(2.0 * (AOB - BOA), fa.lattice), complex(scalar))


def _ladder(cutoff: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, cutoff + 1, dtype=float)), 1)


def _site_ops(sites: int, cutoff: int):
    a = _ladder(cutoff)
    q1 = (a + a.T) / np.sqrt(2)
    p1 = 1j * (a.T - a) / np.sqrt(2)
    eye = np.eye(cutoff + 1)

    def embed(op, j):
        out = np.ones((1, 1))
        for s in range(sites):
            out = np.kron(out, op if s == j else eye)
        return out

    return [embed(q1, j) for j in range(sites)], [embed(p1, j) for j in range(sites)]


def fock_oracle_commutator(
    H: QuadraticLatticeHamiltonian,
    P: TotalMomentum,
    cutoff: int = 5,
    *,
    cubic: float = 0.0,
    pad: int = 2,
    max_dim: int = 100_000,
) -> float:
    """Normalised ``||[H, P]||_F / (||H||_F ||P||_F)`` in a truncated Fock basis.

    ``q_j, p_j`` are built from ladder operators capped at ``cutoff``
    excitations per site; ``H`` (plus ``cubic * sum_j q_j^3``) and ``P`` are
    assembled directly from their lattice coefficients.  Norms are taken on
    the block of basis states with every occupation at most ``cutoff - pad``,
    where products of up to five ladder operators are free of truncation error.
    """
    lat = H.lattice
    sites = lat.size
    if not lat.is_periodic or sites % 2 == 0:
        raise ValueError("the Fock oracle needs a periodic lattice with an odd number of sites")
    if not P.lattice.compatible(lat):
        raise ValueError("momentum operator is built for a different lattice")
    dim = (cutoff + 1) ** sites
    if dim > max_dim:
        raise ValueError(f"Fock dimension {dim} exceeds the resource guard {max_dim}")
    if pad < 0 or pad > cutoff:
        raise ValueError("pad must lie in [0, cutoff]")

    q, p = _site_ops(sites, cutoff)
    Hm = np.zeros((dim, dim), dtype=complex)
    W = H.half_width
    for j in range(sites):
        for m in range(-W, W + 1):
            l = (j + m) % sites
            cqq, cqp, cpp = H.c_qq[m + W], H.c_qp[m + W], H.c_pp[m + W]
            if cqq:
                Hm += cqq * (q[j] @ q[l])
            if cqp:
                Hm += cqp * 0.5 * (q[j] @ p[l] + p[l] @ q[j])
            if cpp:
                Hm += cpp * (p[j] @ p[l])
        if cubic:
            Hm += cubic * (q[j] @ q[j] @ q[j])

    Pm = np.zeros((dim, dim), dtype=complex)
    for i in range(sites):
        for j in range(sites):
            if P.D[i, j]:
                Pm -= P.D[i, j] * (p[i] @ q[j])

    occupations = np.array(list(itertools.product(range(cutoff + 1), repeat=sites)))
    keep = np.flatnonzero(np.all(occupations <= cutoff - pad, axis=1))
    sub = np.ix_(keep, keep)
    C = (Hm @ Pm - Pm @ Hm)[sub]
    return float(np.linalg.norm(C) / (np.linalg.norm(Hm[sub]) * np.linalg.norm(Pm[sub])))


def translate_field(field: SampledField, a: float) -> SampledField:
    """Samples of the continuously translated field ``phi(x - a)`` on the same lattice."""
    lat = field.lattice
    if lat.is_periodic:
        a = a - lat.period * np.round(a / lat.period)
    if a == 0:
        return SampledField(lat, field.values)
    s = np.arange(lat.size) - a / lat.spacing
    return SampledField(lat, _interpolate(field, s, warn=False))


def translation_generator(field: SampledField, h: float = 1e-3) -> SampledField:
    """``d/da translate_field(field, a)`` at ``a = 0`` by a five-point central difference.

    For bandlimited content this equals ``-D f``.
    """
    fp1, fm1 = translate_field(field, h).values, translate_field(field, -h).values
    fp2, fm2 = translate_field(field, 2 * h).values, translate_field(field, -2 * h).values
    return SampledField(field.lattice, (8 * (fp1 - fm1) - (fp2 - fm2)) / (12 * h))


def cubic_witness(q: SampledField) -> float:
    """Classical bracket ``{sum_j q_j^3, P} = -3 sum_j q_j^2 (D q)_j``."""
    dq = apply(_derivative(q.lattice), q).values
    return float(-3.0 * np.sum(q.values**2 * dq))


@dataclass(frozen=True, eq=False)
class Trajectory:
    t: np.ndarray
    q: np.ndarray
    p: np.ndarray
    energy: np.ndarray
    momentum: np.ndarray
    lattice: Lattice

    @property
    def momentum_drift(self) -> float:
        return float(np.max(np.abs(self.momentum - self.momentum[0])))

    @property
    def energy_drift(self) -> float:
        return float(np.max(np.abs(self.energy - self.energy[0])))

    def save(self, directory, prefix: str = "trajectory", snapshot_stride: int = 0) -> list[Path]:
        """Write ``t,energy,momentum`` and, if ``snapshot_stride > 0``, per-snapshot ``j,x,q,p`` files."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        written = [directory / f"{prefix}.csv"]
        with open(written[0], "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "energy", "momentum"])
            for row in zip(self.t, self.energy, self.momentum):
                w.writerow([repr(float(v)) for v in row])
        if snapshot_stride > 0:
            xs = self.lattice.points()
            for i in range(0, self.t.size, snapshot_stride):
                path = directory / f"{prefix}_snapshot_{i:06d}.csv"
                with open(path, "w", newline="") as fh:
                    w = csv.writer(fh)
                    w.writerow(["j", "x", "q", "p"])
                    for j in range(self.lattice.size):
                        w.writerow([j, repr(float(xs[j])), repr(float(self.q[i, j])), repr(float(self.p[i, j]))])
                written.append(path)
        return written


def classical_flow(
    H: QuadraticLatticeHamiltonian,
    q0,
    p0,
    t_final: float = 10.0,
    steps: int = 1000,
    *,
    cubic: float = 0.0,
    record_every: int | None = None,
    max_kick: float = 0.05,
) -> Trajectory:
    """Classical evolution recording energy and total momentum.

    Without a cubic term the linear flow is stepped with the exact propagator
    ``expm(2 Omega A dt)``.  With ``cubic != 0`` the potential gains
    ``cubic * sum_j q_j^3`` and the system is integrated with kick-drift-kick
    leapfrog, which needs ``c_qp == 0``.
    """
    lat = H.lattice
    if not lat.is_periodic:
        raise ValueError("classical flow is provided for periodic lattices")
    if steps < 1:
        raise ValueError("steps must be positive")
    q = np.array(q0.values if isinstance(q0, SampledField) else q0, dtype=float)
    p = np.array(p0.values if isinstance(p0, SampledField) else p0, dtype=float)
    dt = t_final / steps
    record_every = record_every or max(1, steps // 1000)
    form = to_phase_space_form(H)
    P = build_total_momentum(lat.spacing, lat.size, lat.boundary)
    n = lat.size

    def total_energy(qv, pv):
        e = energy(H, qv, pv)
        return e + cubic * float(np.sum(qv**3)) if cubic else e

    ts, qs, ps, es, moms = [], [], [], [], []

    def record(i, qv, pv):
        ts.append(i * dt)
        qs.append(qv.copy())
        ps.append(pv.copy())
        es.append(total_energy(qv, pv))
        moms.append(P.evaluate(qv, pv))

    record(0, q, p)
    if not cubic:
        step = expm(2.0 * symplectic_form(n) @ form.matrix * dt)
        z = np.concatenate([q, p])
        for i in range(1, steps + 1):
            z = step @ z
            if i % record_every == 0 or i == steps:
                record(i, z[:n], z[n:])
    else:
        if np.any(form.qp != 0):
            raise ValueError("leapfrog needs a Hamiltonian without q-p coupling")
        if abs(cubic) * np.max(np.abs(q)) * dt > max_kick:
            raise ValueError("time step too large for the cubic term; increase steps")
        two_qq, two_pp = 2.0 * form.qq, 2.0 * form.pp

        def force(qv):
            return -(two_qq @ qv + 3.0 * cubic * qv * qv)

        p = p + 0.5 * dt * force(q)
        for i in range(1, steps + 1):
            q = q + dt * (two_pp @ p)
            f = force(q)
            if i % record_every == 0 or i == steps:
                record(i, q, p + 0.5 * dt * f)
            p = p + dt * f
    return Trajectory(np.array(ts), np.array(qs), np.array(ps), np.array(es), np.array(moms), lat)


def random_flow_state(
    lattice: Lattice,
    rng: np.random.Generator,
    target_energy: float = 20.0,
    reference: QuadraticLatticeHamiltonian | None = None,
):
    """Random real ``(q, p)`` using every lattice momentum with ``|k| <= 0.9 Omega``.

    The pair is scaled so that ``energy(reference, q, p) == target_energy``; the
    reference defaults to the unit-mass Klein-Gordon model on ``lattice``.  A
    dense spectrum guarantees many aliased triples ``k1 + k2 + k3 = 2 pi r / dx``,
    which is what lets a cubic term move ``P``; with a handful of random modes
    the drift can vanish by accident.
    """
    if reference is None:
        reference = build_bandlimited_kg(1.0, lattice.spacing, lattice.size, lattice.boundary)
    n_modes = lattice.size
    q = sample(random_test_function(rng, lattice, n_modes, 0.9), lattice)
    p = sample(random_test_function(rng, lattice, n_modes, 0.9), lattice)
    scale = np.sqrt(target_energy / energy(reference, q, p))
    return scale * q, scale * p


def conservation_report(
    H: QuadraticLatticeHamiltonian,
    *,
    cubic: float = 0.0,
    fock_sites: int = 3,
    fock_cutoff: int = 5,
    flow_state: tuple | None = None,
    t_final: float = 10.0,
    steps: int | None = None,
    record_every: int | None = None,
    return_trajectory: bool = False,
):
    """Kernel residual, Fock-oracle residual and flow drift for one model.

    The Fock check rebuilds the same model family on ``fock_sites`` sites.
    With ``return_trajectory`` the result is ``(report, trajectory)``; the
    trajectory is None when no ``flow_state`` is given.
    """
    lat = H.lattice
    report = {"hamiltonian": H.label, "params": dict(H.params), "cubic": cubic}
    P = build_total_momentum(lat.spacing, lat.size, lat.boundary)
    comm = quadratic_commutator(to_phase_space_form(H), P)
    report["kernel_residual"] = comm.max_abs
    report["kernel_scalar"] = abs(comm.scalar)

    small = _small_copy(H, fock_sites)
    P_small = build_total_momentum(lat.spacing, fock_sites, Boundary.PERIODIC)
    report["fock_residual"] = fock_oracle_commutator(small, P_small, fock_cutoff, cubic=cubic)

    if flow_state is not None:
        if steps is None:
            steps = 100_000 if cubic else 1000
        traj = classical_flow(
            H, *flow_state, t_final=t_final, steps=steps, cubic=cubic, record_every=record_every
        )
        report["flow_drift"] = traj.momentum_drift
        report["energy_drift"] = traj.energy_drift
    else:
        traj = None
        report["flow_drift"] = None
        report["energy_drift"] = None
    return (report, traj) if return_trajectory else report


def _small_copy(H: QuadraticLatticeHamiltonian, sites: int) -> QuadraticLatticeHamiltonian:
    lat = H.lattice
    if H.label in ("klein_gordon", "harmonic_chain"):
        return hamiltonian_from_spec({"type": H.label, "params": H.params, "dx": lat.spacing, "n": sites, "boundary": "periodic"})
    # generic translation-invariant model: keep the coefficient rows, wrap onto the small circle
    return QuadraticLatticeHamiltonian(
        Lattice(lat.spacing, 0.0, sites, Boundary.PERIODIC), H.c_qq, H.c_qp, H.c_pp, label=H.label, params=H.params,
    )


def save_report(path, report: dict) -> None:
    Path(path).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
