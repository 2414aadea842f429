"""Periodic-box discretization, Fourier multipliers, and norm monitors.

The box is [-L1, L1) x [-L2, L2) with n1 x n2 points (powers of two) and
discrete modes xi_j = pi*j/L_k.  Fields are complex128 arrays of shape
(n1, n2), C-ordered, axis 1 fastest.  All Fourier work goes through
scipy.fft with a worker count taken from the MSQ2_WORKERS environment
variable.
"""

from __future__ import annotations

import os
import struct
import warnings
from dataclasses import dataclass, replace

import numpy as np
import scipy.fft as sfft

from .dispersion import DispersionSymbol2D
from .errors import ConfigError, GridMismatch

SNAPSHOT_MAGIC = b"MSQ2"
SNAPSHOT_VERSION = 1


def fft_workers() -> int:
    try:
        return max(1, int(os.environ.get("MSQ2_WORKERS", os.cpu_count() or 1)))
    except ValueError:
        return 1


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid2D:
    n1: int
    n2: int
    L1: float
    L2: float

    def __post_init__(self):
        for n in (self.n1, self.n2):
            if n < 8 or not _is_pow2(n):
                raise ConfigError(f"grid size {n} must be a power of two >= 8")
        if self.L1 <= 0 or self.L2 <= 0:
            raise ConfigError("box half-lengths must be positive")

    @property
    def dx(self) -> tuple[float, float]:
        return (2.0 * self.L1 / self.n1, 2.0 * self.L2 / self.n2)

    @property
    def cell_area(self) -> float:
        d1, d2 = self.dx
        return d1 * d2

    def axis(self, k: int) -> np.ndarray:
        n, L = ((self.n1, self.L1), (self.n2, self.L2))[k]
        return -L + (2.0 * L / n) * np.arange(n)

    def modes(self, k: int) -> np.ndarray:
        """Discrete frequencies pi*j/L_k for j in [-n/2, n/2), FFT order."""
        n, L = ((self.n1, self.L1), (self.n2, self.L2))[k]
        return 2.0 * np.pi * sfft.fftfreq(n, d=2.0 * L / n)

    def nyquist(self, k: int) -> float:
        n, L = ((self.n1, self.L1), (self.n2, self.L2))[k]
        return np.pi * n / (2.0 * L)


@dataclass
class ComplexField:
    """Complex 2D field samples with the physical time they belong to."""

    grid: Grid2D
    data: np.ndarray
    t: float

    def __post_init__(self):
        if self.data.shape != (self.grid.n1, self.grid.n2):
            raise GridMismatch(
                f"data shape {self.data.shape} vs grid ({self.grid.n1}, {self.grid.n2})")
        if self.data.dtype != np.complex128:
            self.data = self.data.astype(np.complex128)

    def copy(self) -> "ComplexField":
        return ComplexField(self.grid, self.data.copy(), self.t)


class BoundaryContamination(UserWarning):
    """Coordinate multiplication pushed visible mass into the outer frame."""


@dataclass(frozen=True)
class NormBundle:
    l2: float
    linf: float
    l3: float
    h2: float
    weighted: tuple[float, float]


def l2_norm(f: ComplexField) -> float:
    return float(np.sqrt(f.grid.cell_area * np.sum(np.abs(f.data) ** 2)))


def linf_norm(f: ComplexField) -> float:
    return float(np.max(np.abs(f.data)))


def l3_norm(f: ComplexField) -> float:
    return float((f.grid.cell_area * np.sum(np.abs(f.data) ** 3)) ** (1.0 / 3.0))


def boundary_mass(f: ComplexField, frame_fraction: float = 0.1) -> float:
    """Fraction of the squared L2 norm living in the outer frame of the box."""
    g = f.grid
    x1 = np.abs(g.axis(0)) >= (1.0 - frame_fraction) * g.L1
    x2 = np.abs(g.axis(1)) >= (1.0 - frame_fraction) * g.L2
    mask = x1[:, None] | x2[None, :]
    total = np.sum(np.abs(f.data) ** 2)
    if total == 0.0:
        return 0.0
    return float(np.sum(np.abs(f.data[mask]) ** 2) / total)


class Spectral2D:
    """Grid + symbol context: multipliers, propagator, weighted operators.

    Mode-space tables (F on the mode grid, per-axis F') are cached once; the
    instance is immutable in practice and safe to share.
    """

    def __init__(self, grid: Grid2D, sym2d: DispersionSymbol2D):
        self.grid = grid
        self.sym = sym2d
        self.eta1 = grid.modes(0)
        self.eta2 = grid.modes(1)
        self.F_modes = (np.asarray(sym2d.fx.eval(self.eta1), dtype=float)[:, None]
                        + np.asarray(sym2d.fy.eval(self.eta2), dtype=float)[None, :])
        self.Fp1 = np.asarray(sym2d.fx.d1(self.eta1), dtype=float)
        self.Fp2 = np.asarray(sym2d.fy.d1(self.eta2), dtype=float)
        cut1 = (2.0 / 3.0) * grid.nyquist(0)
        cut2 = (2.0 / 3.0) * grid.nyquist(1)
        self.dealias_mask = ((np.abs(self.eta1) <= cut1)[:, None]
                             & (np.abs(self.eta2) <= cut2)[None, :])

    # -- transforms -----------------------------------------------------
    def fft(self, data: np.ndarray) -> np.ndarray:
        return sfft.fft2(data, workers=fft_workers())

    def ifft(self, data: np.ndarray) -> np.ndarray:
        return sfft.ifft2(data, workers=fft_workers())

    def apply_multiplier(self, f: ComplexField, m) -> ComplexField:
        """Pointwise multiplication of the Fourier coefficients by m.

        m may be an (n1, n2) array on the FFT-ordered mode grid or a callable
        m(xi1, xi2) evaluated on the broadcast mode mesh.
        """
        if callable(m):
            m = m(self.eta1[:, None], self.eta2[None, :])
        out = self.ifft(self.fft(f.data) * m)
        return ComplexField(f.grid, out, f.t)

    def free_propagate(self, f: ComplexField, dt: float) -> ComplexField:
        if dt == 0.0:
            return f.copy()
        out = self.ifft(self.fft(f.data) * np.exp(1j * dt * self.F_modes))
        return ComplexField(f.grid, out, f.t + dt)

    def dealias(self, f: ComplexField) -> ComplexField:
        out = self.ifft(self.fft(f.data) * self.dealias_mask)
        return ComplexField(f.grid, out, f.t)

    # -- weighted vector-field operators ---------------------------------
    def vector_field_apply(self, f: ComplexField, k: int, t: float,
                           power: int = 1, leak_tol: float | None = 1e-3) -> ComplexField:
        """(x_k + t*F_k'(D))^power applied to f, alternating spaces.

        power=2 expands the square as x^2 u + t x F'(D)u + t F'(D)(x u)
        + t^2 F'(D)^2 u so only two extra transforms are spent.
        """
        if power not in (1, 2):
            raise ConfigError("power must be 1 or 2")
        g = self.grid
        x = g.axis(k)
        xs = x[:, None] if k == 0 else x[None, :]
        fp = self.Fp1[:, None] if k == 0 else self.Fp2[None, :]

        uhat = self.fft(f.data)
        if power == 1:
            out = xs * f.data + t * self.ifft(fp * uhat)
        else:
            xu_hat = self.fft(xs * f.data)
            out = (xs * xs * f.data
                   + t * xs * self.ifft(fp * uhat)
                   + t * self.ifft(fp * xu_hat)
                   + t * t * self.ifft(fp * fp * uhat))
        res = ComplexField(g, out, f.t)
        if leak_tol is not None:
            bm = boundary_mass(res)
            if bm > leak_tol:
                warnings.warn(
                    f"vector_field_apply axis {k}: boundary mass {bm:.2e} > {leak_tol:g}",
                    BoundaryContamination, stacklevel=2)
        return res

    # -- norms ------------------------------------------------------------
    def h2_norm(self, f: ComplexField) -> float:
        uhat = self.fft(f.data)
        w = (1.0 + self.eta1[:, None] ** 2 + self.eta2[None, :] ** 2)
        scale = f.grid.cell_area / (f.grid.n1 * f.grid.n2)
        return float(np.sqrt(scale * np.sum((w * np.abs(uhat)) ** 2)))

    def weighted_norms(self, f: ComplexField, t: float) -> tuple[float, float]:
        vals = []
        for k in (0, 1):
            vals.append(l2_norm(self.vector_field_apply(f, k, t, power=2,
                                                        leak_tol=None)))
        return (vals[0], vals[1])

    def norms(self, f: ComplexField) -> NormBundle:
        return NormBundle(
            l2=l2_norm(f), linf=linf_norm(f), l3=l3_norm(f),
            h2=self.h2_norm(f), weighted=self.weighted_norms(f, f.t))

    def datum_norm(self, u0: ComplexField) -> float:
        """H2 norm plus the two axis weighted norms at unit time.

        Scaling a datum by c scales the value by |c|, so dividing by it
        renormalizes initial data to a unit-size class before the epsilon
        factor is applied.
        """
        w1, w2 = self.weighted_norms(u0, 1.0)
        return self.h2_norm(u0) + w1 + w2

    # -- continuum Fourier-transform conventions --------------------------
    def to_fourier(self, f: ComplexField) -> np.ndarray:
        """Continuum-normalized transform (2pi)^-1 int u e^{-ix.xi} dx
        sampled on the FFT-ordered mode grid."""
        g = f.grid
        ph1 = np.exp(1j * g.L1 * self.eta1)[:, None]
        ph2 = np.exp(1j * g.L2 * self.eta2)[None, :]
        return (g.cell_area / (2.0 * np.pi)) * ph1 * ph2 * self.fft(f.data)

    def from_fourier(self, uhat: np.ndarray, t: float) -> ComplexField:
        """Inverse of to_fourier."""
        g = self.grid
        ph1 = np.exp(-1j * g.L1 * self.eta1)[:, None]
        ph2 = np.exp(-1j * g.L2 * self.eta2)[None, :]
        data = self.ifft((2.0 * np.pi / g.cell_area) * ph1 * ph2 * uhat)
        return ComplexField(g, data, t)


# ---------------------------------------------------------------------------
# snapshot format (bit-exact): magic "MSQ2", u32 version, u64 n1, u64 n2,
# f64 L1, f64 L2, f64 t, then n1*n2 little-endian (re, im) f64 pairs in C
# order (axis 1 fastest).
# ---------------------------------------------------------------------------

_HEADER = struct.Struct("<4sIQQddd")


def write_snapshot(path, f: ComplexField) -> None:
    g = f.grid
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(SNAPSHOT_MAGIC, SNAPSHOT_VERSION,
                              g.n1, g.n2, g.L1, g.L2, f.t))
        fh.write(np.ascontiguousarray(f.data, dtype="<c16").tobytes())


def read_snapshot(path) -> ComplexField:
    with open(path, "rb") as fh:
        magic, version, n1, n2, L1, L2, t = _HEADER.unpack(fh.read(_HEADER.size))
        if magic != SNAPSHOT_MAGIC:
            raise ConfigError(f"{path}: bad magic {magic!r}")
        if version != SNAPSHOT_VERSION:
            raise ConfigError(f"{path}: unsupported version {version}")
        data = np.frombuffer(fh.read(16 * n1 * n2), dtype="<c16").reshape(n1, n2)
    return ComplexField(Grid2D(int(n1), int(n2), float(L1), float(L2)),
                        data.astype(np.complex128), float(t))


# ---------------------------------------------------------------------------
# reference data
# ---------------------------------------------------------------------------

def gaussian_datum(grid: Grid2D, sigma: float = 1.0, xi0=(0.0, 0.0)) -> ComplexField:
    """exp(-|x|^2/sigma^2) times an optional carrier exp(i xi0 . x), at t=1."""
    x1 = grid.axis(0)[:, None]
    x2 = grid.axis(1)[None, :]
    env = np.exp(-(x1 ** 2 + x2 ** 2) / sigma ** 2)
    if xi0 != (0.0, 0.0):
        env = env * np.exp(1j * (xi0[0] * x1 + xi0[1] * x2))
    return ComplexField(grid, env.astype(np.complex128), 1.0)


def gaussian_free_closed_form(grid: Grid2D, t: float) -> ComplexField:
    """Free evolution of exp(-|x|^2) from t=1 under F(xi)=|xi|^2.

    Completing the square in the Fourier integral gives
    u(t, x) = exp(-|x|^2/(1-4i(t-1))) / (1-4i(t-1)).
    """
    b = 1.0 - 4j * (t - 1.0)
    x1 = grid.axis(0)[:, None]
    x2 = grid.axis(1)[None, :]
    data = np.exp(-(x1 ** 2 + x2 ** 2) / b) / b
    return ComplexField(grid, data.astype(np.complex128), t)
