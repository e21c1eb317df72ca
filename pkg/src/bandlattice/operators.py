"""Bandlimited first/second derivative kernels.

Kernels are translation invariant and stored as convolution coefficients
``t[m]`` for ``m = -M..M`` acting as ``(K f)_j = sum_m t[m] f_{j-m}``, so that
``t[m]`` is the matrix element ``K_{j+m, j}``.  The first-derivative row is the
SLAC / infinite-order-stencil kernel ``t[m] = (-1)^m / (m dx)``.

Periodic kernels live on an odd circle of ``N`` sites and additionally carry
their Fourier symbol at the lattice momenta ``k_n = 2 pi n / (N dx)``,
``n = -(N-1)/2 .. (N-1)/2``; they are applied spectrally.  The symbol is the
multiplier seen by ``exp(+i k x)``: ``i k`` for the first derivative and
``-k^2`` for the second.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import fftconvolve
from scipy.special import zeta

from .lattice import Boundary, SampledField

__all__ = [
    "Parity",
    "BandedKernel",
    "derivative_kernel",
    "second_derivative_kernel",
    "identity_kernel",
    "apply",
    "compose",
    "partial_sum_S",
    "basel_partial_sum",
    "save_kernel",
]


class Parity(str, enum.Enum):
    ANTISYMMETRIC = "antisymmetric"
    SYMMETRIC = "symmetric"


@dataclass(frozen=True, eq=False)
class BandedKernel:
    """Translation-invariant lattice operator.

    Attributes
    ----------
    spacing : float
        Lattice spacing the coefficients are scaled for.
    mode : Boundary
        ``truncated`` means a literal Toeplitz row of half-width ``M``;
        ``periodic`` means a circulant on ``size`` sites.
    coefficients : ndarray
        ``t[-M..M]`` stored at index ``m + M``.  For periodic kernels
        ``M = (size - 1) / 2`` and every residue mod ``size`` appears once.
    symbol : ndarray or None
        Periodic only: Fourier multiplier at centred lattice momenta.
    residual : float
        Estimated truncation error.  For builder kernels this bounds the
        dropped tail of the row; for composed kernels it estimates the error of
        the lag-0 coefficient relative to the infinite-lattice product.
    decay : (C, p) or None
        Known envelope ``|t[m]| <= C / |m|**p`` used for residual estimates.
    """

    spacing: float
    mode: Boundary
    parity: Parity
    coefficients: np.ndarray
    symbol: np.ndarray | None = None
    size: int | None = None
    residual: float = 0.0
    decay: tuple[float, float] | None = None
    label: str = ""

    def __post_init__(self):
        c = np.asarray(self.coefficients)
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)
        if self.symbol is not None:
            s = np.asarray(self.symbol)
            s.setflags(write=False)
            object.__setattr__(self, "symbol", s)

    @property
    def half_width(self) -> int:
        return (self.coefficients.size - 1) // 2

    @property
    def is_periodic(self) -> bool:
        return self.mode is Boundary.PERIODIC

    def coefficient(self, m: int) -> float:
        M = self.half_width
        if self.is_periodic:
            m = (m + M) % self.size - M
        if abs(m) > M:
            return 0.0
        return self.coefficients[m + M]

    def momenta(self) -> np.ndarray:
        if not self.is_periodic:
            raise ValueError("momenta are defined for periodic kernels only")
        return _centred_momenta(self.size, self.spacing)

    def symbol_at(self, k):
        """Fourier multiplier ``sum_m t[m] exp(-i k m dx)`` of the stored row."""
        k = np.asarray(k, dtype=float)
        m = np.arange(-self.half_width, self.half_width + 1)
        phase = np.exp(-1j * np.multiply.outer(k, m) * self.spacing)
        return phase @ self.coefficients

    def matrix(self, n: int | None = None) -> np.ndarray:
        """Dense ``n x n`` matrix ``K[j, l] = t[j - l]`` (wrapped when periodic)."""
        if self.is_periodic:
            n = self.size
        elif n is None:
            raise ValueError("truncated kernels need an explicit matrix size")
        j = np.arange(n)
        lag = j[:, None] - j[None, :]
        M = self.half_width
        if self.is_periodic:
            lag = (lag + M) % n - M
        out = np.zeros((n, n), dtype=self.coefficients.dtype)
        inside = np.abs(lag) <= M
        out[inside] = self.coefficients[lag[inside] + M]
        return out


def _centred_momenta(n: int, dx: float) -> np.ndarray:
    idx = np.arange(-(n - 1) // 2, (n - 1) // 2 + 1)
    return 2 * np.pi * idx / (n * dx)


def _check_mode(mode, extent: int) -> Boundary:
    mode = Boundary(mode)
    if mode is Boundary.PERIODIC:
        if extent < 3 or extent % 2 == 0:
            raise ValueError(
                f"periodic kernels need an odd number of sites >= 3, got {extent}"
            )
    elif extent < 1:
        raise ValueError(f"half-width must be >= 1, got {extent}")
    return mode


def _mirror(positive: np.ndarray, centre: float, parity: Parity) -> np.ndarray:
    sign = -1.0 if parity is Parity.ANTISYMMETRIC else 1.0
    return np.concatenate([sign * positive[::-1], [centre], positive])


def derivative_kernel(dx: float, mode="truncated", extent: int = 1000) -> BandedKernel:
    """Bandlimited first derivative.

    ``extent`` is the half-width ``M`` for truncated kernels or the (odd)
    number of sites ``N`` for periodic ones.
    """
    mode = _check_mode(mode, extent)
    if mode is Boundary.TRUNCATED:
        m = np.arange(1, extent + 1)
        pos = (-1.0) ** m / (m * dx)
        return BandedKernel(
            dx, mode, Parity.ANTISYMMETRIC, _mirror(pos, 0.0, Parity.ANTISYMMETRIC),
            residual=2.0 / ((extent + 1) * dx), decay=(1.0 / dx, 1.0), label="D",
        )
    n = extent
    m = np.arange(1, (n - 1) // 2 + 1)
    # wrapped SLAC row: sum_p (-1)^(m+pN) / (m+pN) = (-1)^m pi / (N sin(pi m / N)) for odd N
    pos = (-1.0) ** m * np.pi / (n * dx * np.sin(np.pi * m / n))
    k = _centred_momenta(n, dx)
    return BandedKernel(
        dx, mode, Parity.ANTISYMMETRIC, _mirror(pos, 0.0, Parity.ANTISYMMETRIC),
        symbol=1j * k, size=n, label="D",
    )


def second_derivative_kernel(dx: float, mode="truncated", extent: int = 1000) -> BandedKernel:
    """Bandlimited second derivative, diagonal ``-pi^2 / (3 dx^2)`` on the infinite lattice."""
    mode = _check_mode(mode, extent)
    if mode is Boundary.TRUNCATED:
        m = np.arange(1, extent + 1)
        pos = -2.0 * (-1.0) ** m / (m**2 * dx**2)
        tail = 4.0 * zeta(2.0, extent + 1) / dx**2
        return BandedKernel(
            dx, mode, Parity.SYMMETRIC,
            _mirror(pos, -np.pi**2 / (3 * dx**2), Parity.SYMMETRIC),
            residual=float(tail), decay=(2.0 / dx**2, 2.0), label="D2",
        )
    n = extent
    m = np.arange(1, (n - 1) // 2 + 1)
    s = np.sin(np.pi * m / n)
    pos = -2.0 * np.pi**2 * (-1.0) ** m * np.cos(np.pi * m / n) / (n**2 * dx**2 * s**2)
    centre = -np.pi**2 * (n**2 - 1) / (3.0 * n**2 * dx**2)
    k = _centred_momenta(n, dx)
    return BandedKernel(
        dx, mode, Parity.SYMMETRIC, _mirror(pos, centre, Parity.SYMMETRIC),
        symbol=(-(k * k)).astype(complex), size=n, label="D2",
    )


def identity_kernel(dx: float, mode="truncated", extent: int = 1) -> BandedKernel:
    mode = _check_mode(mode, extent)
    if mode is Boundary.TRUNCATED:
        c = np.zeros(2 * extent + 1)
        c[extent] = 1.0
        return BandedKernel(dx, mode, Parity.SYMMETRIC, c, decay=(0.0, math.inf), label="I")
    c = np.zeros(extent)
    c[(extent - 1) // 2] = 1.0
    return BandedKernel(
        dx, mode, Parity.SYMMETRIC, c, symbol=np.ones(extent, dtype=complex), size=extent, label="I",
    )


def _require_real(values: np.ndarray, result: np.ndarray, kernel: BandedKernel) -> np.ndarray:
    if values.dtype.kind == "f" and np.isrealobj(kernel.coefficients):
        return result.real.copy()
    return result


def apply(kernel: BandedKernel, field: SampledField) -> SampledField:
    """Apply ``kernel`` to ``field``.

    Periodic kernels multiply by the symbol in the discrete Fourier basis.
    Truncated kernels convolve directly, zero-extending a truncated field or
    folding the row onto the circle for a periodic field.
    """
    lat = field.lattice
    if kernel.spacing != lat.spacing:
        raise ValueError(f"kernel spacing {kernel.spacing} != lattice spacing {lat.spacing}")
    f = field.values
    if kernel.is_periodic:
        if not lat.is_periodic or kernel.size != lat.size:
            raise ValueError("a periodic kernel needs a periodic field with the same number of sites")
        spectrum = np.fft.fft(f) * np.fft.ifftshift(kernel.symbol)
        out = np.fft.ifft(spectrum)
        return SampledField(lat, _require_real(f, out, kernel))
    M = kernel.half_width
    if lat.is_periodic:
        folded = np.zeros(lat.size, dtype=kernel.coefficients.dtype)
        np.add.at(folded, np.arange(-M, M + 1) % lat.size, kernel.coefficients)
        # circular convolution, ascending lag order
        out = np.zeros(lat.size, dtype=np.result_type(f, folded))
        for m in range(lat.size):
            if folded[m] != 0:
                out = out + folded[m] * np.roll(f, m)
        return SampledField(lat, out)
    full = np.convolve(f, kernel.coefficients, mode="full")
    return SampledField(lat, full[M:M + lat.size])


def compose(a: BandedKernel, b: BandedKernel) -> BandedKernel:
    """Operator product ``a @ b``.

    Periodic: pointwise symbol product (exact).  Truncated: the convolved row
    cut back to ``min(M_a, M_b)``; ``residual`` estimates the missing tail of
    the lag-0 coefficient.
    """
    if a.mode is not b.mode:
        raise ValueError("cannot compose kernels of different modes")
    if a.spacing != b.spacing:
        raise ValueError("cannot compose kernels of different spacing")
    parity = Parity.SYMMETRIC if a.parity is b.parity else Parity.ANTISYMMETRIC
    label = f"{a.label}*{b.label}"
    if a.is_periodic:
        if a.size != b.size:
            raise ValueError("periodic kernels must share the number of sites")
        symbol = a.symbol * b.symbol
        row = np.fft.fftshift(np.fft.ifft(np.fft.ifftshift(symbol)))
        row = _enforce_parity(row, parity)
        if np.isrealobj(a.coefficients) and np.isrealobj(b.coefficients):
            row = row.real
        return BandedKernel(a.spacing, a.mode, parity, row, symbol=symbol, size=a.size, label=label)
    M = min(a.half_width, b.half_width)
    full = fftconvolve(a.coefficients, b.coefficients)
    centre = a.half_width + b.half_width
    row = _enforce_parity(full[centre - M:centre + M + 1], parity)
    return BandedKernel(
        a.spacing, a.mode, parity, row,
        residual=_lag0_tail(a, b, M),
        label=label,
    )


def _lag0_tail(a: BandedKernel, b: BandedKernel, M: int) -> float:
    """Envelope bound on ``sum_{|l| > M} |a_l b_{-l}|``."""
    if a.decay is None or b.decay is None:
        return math.nan
    (ca, pa), (cb, pb) = a.decay, b.decay
    if ca == 0 or cb == 0:
        return 0.0
    return float(2 * ca * cb * zeta(pa + pb, M + 1))


def _enforce_parity(row: np.ndarray, parity: Parity) -> np.ndarray:
    rev = row[::-1]
    if parity is Parity.SYMMETRIC:
        return 0.5 * (row + rev)
    return 0.5 * (row - rev)


def partial_sum_S(m: int, L: int) -> float:
    """``sum_{l=-L..L, l not in {0, m}} 1 / (l (l - m))``; tends to ``2 / m^2``."""
    m = int(m)
    if m == 0:
        raise ValueError("m must be nonzero")
    if L <= abs(m):
        raise ValueError(f"cutoff L={L} must exceed |m|={abs(m)}")
    l = np.arange(-L, L + 1, dtype=float)
    l = l[(l != 0) & (l != m)]
    terms = 1.0 / (l * (l - m))
    # correctly rounded: S(m) and S(-m) share the same multiset of terms
    return float(math.fsum(terms))


def basel_partial_sum(L: int) -> float:
    """``sum_{m=1..L} 1 / m^2``."""
    m = np.arange(1, L + 1, dtype=float)
    return math.fsum(1.0 / (m * m))


def save_kernel(path, kernel: BandedKernel) -> None:
    """Dump ``m,coefficient`` (truncated) or ``n,k,symbol_re,symbol_im`` (periodic)."""
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        if kernel.is_periodic:
            w.writerow(["n", "k", "symbol_re", "symbol_im"])
            half = (kernel.size - 1) // 2
            for n, k, s in zip(range(-half, half + 1), kernel.momenta(), kernel.symbol):
                w.writerow([n, repr(float(k)), repr(float(s.real)), repr(float(s.imag))])
        else:
            w.writerow(["m", "coefficient"])
            M = kernel.half_width
            for m, c in zip(range(-M, M + 1), kernel.coefficients):
                w.writerow([m, repr(float(np.real(c)))])
