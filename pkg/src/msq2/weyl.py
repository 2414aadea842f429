"""Semiclassical Weyl quantization on grids.

A 1D symbol a(x, xi) becomes an n x n kernel via a DFT in the frequency
slot for every midpoint (x_i + y_j)/2.  The frequency argument is sampled
at xi = h * eta with eta the grid modes, which makes the quantization of
a(xi) = xi coincide with (h/i) d/dx exactly on band-limited data and the
quantization of a(x) coincide with pointwise multiplication.  Separable 2D
symbols (disjoint variable pairs) are applied as row/column sweeps.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.fft as sfft

from .errors import ConfigError, DegenerateFit, GridMismatch
from .fitting import FitResult, fit_decay_rate
from .grid import ComplexField, Spectral2D, fft_workers

_INDEX_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


class AliasWarning(UserWarning):
    """Symbol carries significant weight at the Nyquist frequency."""


def uniform_axis(n: int, half_length: float) -> np.ndarray:
    """n points on [-half_length, half_length), periodic convention."""
    return -half_length + (2.0 * half_length / n) * np.arange(n)


def _antidiagonal_indices(n: int) -> tuple[np.ndarray, np.ndarray]:
    if n not in _INDEX_CACHE:
        i = np.arange(n, dtype=np.int32)
        _INDEX_CACHE[n] = (i[:, None] + i[None, :],
                           (i[:, None] - i[None, :]) % np.int32(n))
    return _INDEX_CACHE[n]


@dataclass
class WeylOperator1D:
    h: float
    y: np.ndarray
    dy: float
    kernel: np.ndarray
    symbol_id: str = ""

    def apply(self, vec: np.ndarray) -> np.ndarray:
        return self.dy * (self.kernel @ vec)

    def apply_along(self, data: np.ndarray, axis: int) -> np.ndarray:
        if data.shape[axis] != self.y.size:
            raise GridMismatch(
                f"axis {axis} has size {data.shape[axis]}, operator expects {self.y.size}")
        if axis == 0:
            return self.dy * (self.kernel @ data)
        return self.dy * (data @ self.kernel.T)

    def hermiticity_defect(self) -> float:
        scale = np.max(np.abs(self.kernel))
        if scale == 0.0:
            return 0.0
        return float(np.max(np.abs(self.kernel - self.kernel.conj().T)) / scale)

    def norm_l2_to_linf(self) -> float:
        return float(np.max(np.sqrt(self.dy * np.sum(np.abs(self.kernel) ** 2,
                                                     axis=1))))

    def norm_l2_to_l2(self, iters: int = 200, tol: float = 1e-12,
                      seed: int = 7) -> float:
        return _matrix_norm_l2(self.dy * self.kernel, iters, tol, seed)


def _matrix_norm_l2(M: np.ndarray, iters: int = 200, tol: float = 1e-12,
                    seed: int = 7) -> float:
    """Dominant singular value by power iteration on M^H M."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(M.shape[1]) + 1j * rng.standard_normal(M.shape[1])
    x /= np.linalg.norm(x)
    sigma = 0.0
    for _ in range(iters):
        y = M @ x
        new_sigma = np.linalg.norm(y)
        if new_sigma == 0.0:
            return 0.0
        x = M.conj().T @ y
        nx = np.linalg.norm(x)
        if nx == 0.0:
            return float(new_sigma)
        x /= nx
        if abs(new_sigma - sigma) <= tol * new_sigma:
            return float(new_sigma)
        sigma = new_sigma
    return float(sigma)


def build_weyl_1d(symbol: Callable[[np.ndarray, np.ndarray], np.ndarray],
                  y: np.ndarray, h: float, symbol_id: str = "",
                  alias_tol: float = 1e-8) -> WeylOperator1D:
    """Kernel K(x,y) = (2 pi h)^-1 dxi sum_xi e^{i(x-y)xi/h} a((x+y)/2, xi).

    The xi sum runs over h * (grid modes), evaluated for every midpoint with
    one length-n DFT per antidiagonal.  Cost O(n^2 log n) to build, O(n^2)
    to apply.
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    dy = y[1] - y[0]
    if not np.allclose(np.diff(y), dy, rtol=0, atol=1e-12 * abs(dy)):
        raise ConfigError("Weyl axis must be uniform")
    if not (0.0 < h <= 1.0):
        raise ConfigError("h must lie in (0, 1]")

    eta = 2.0 * np.pi * sfft.fftfreq(n, d=dy)
    xi = h * eta
    mid = y[0] + 0.5 * dy * np.arange(2 * n - 1)
    A = np.asarray(symbol(mid[:, None], xi[None, :]), dtype=np.complex128)

    peak = np.max(np.abs(A))
    if peak > 0 and np.max(np.abs(A[:, n // 2])) > alias_tol * peak:
        warnings.warn(f"symbol {symbol_id or '<anon>'} has Nyquist mass "
                      f"> {alias_tol:g} of its peak", AliasWarning, stacklevel=2)

    B = n * sfft.ifft(A, axis=1, workers=fft_workers())
    P, D = _antidiagonal_indices(n)
    K = B[P, D] / (n * dy)
    return WeylOperator1D(h=h, y=y, dy=float(dy), kernel=K, symbol_id=symbol_id)


def weyl_apply_separable(op1: WeylOperator1D, op2: WeylOperator1D,
                         data: np.ndarray) -> np.ndarray:
    """Apply the axis-0 operator to every column slice, then axis-1.

    Symbols in disjoint variable pairs commute, so the order is immaterial
    up to rounding.
    """
    return op2.apply_along(op1.apply_along(data, 0), 1)


# ---------------------------------------------------------------------------
# cutoff profile and the near-set projector
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CutoffProfile:
    """Separable bump profile: 1 on [-r1, r1], 0 outside [-r2, r2].

    The bridge is the standard exp(-1/t) smooth step, so every derivative
    vanishes at both junctions.
    """

    r1: float = 1.0
    r2: float = 2.0

    def __post_init__(self):
        if not (0.0 < self.r1 < self.r2):
            raise ConfigError("need 0 < r1 < r2")

    def gamma(self, s) -> np.ndarray:
        s = np.abs(np.asarray(s, dtype=float))
        tau = (s - self.r1) / (self.r2 - self.r1)
        tau = np.clip(tau, 0.0, 1.0)
        with np.errstate(divide="ignore", over="ignore"):
            a = np.where(tau > 0.0, np.exp(-1.0 / np.maximum(tau, 1e-300)), 0.0)
            b = np.where(tau < 1.0, np.exp(-1.0 / np.maximum(1.0 - tau, 1e-300)), 0.0)
        return b / (a + b)

    def gamma2d(self, s1, s2) -> np.ndarray:
        return self.gamma(s1) * self.gamma(s2)


@dataclass
class SemiclassicalFrame:
    """Rescaled view v(t, y) = t*u(t, t*y) plus its near/far split.

    The y grid is the physical grid scaled by 1/t, so building the frame
    never interpolates; h*t = 1 by construction and v_near + v_far == v
    bitwise.
    """

    t: float
    h: float
    y1: np.ndarray
    y2: np.ndarray
    dy: tuple[float, float]
    v: np.ndarray
    v_near: np.ndarray
    v_far: np.ndarray


def projector_ops(ops: Spectral2D, t: float,
                  cutoff: CutoffProfile) -> tuple[WeylOperator1D, WeylOperator1D]:
    h = 1.0 / t
    sh = np.sqrt(h)
    y1 = ops.grid.axis(0) / t
    y2 = ops.grid.axis(1) / t
    fx, fy = ops.sym.branches
    # The cutoff rides the stationary line x = -F'(xi), which reaches the
    # grid's frequency boundary at positions where the solution carries no
    # mass; the Nyquist-row warning is expected and harmless here.
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AliasWarning)
        op1 = build_weyl_1d(lambda s, xi: cutoff.gamma((s + fx.d1(xi)) / sh),
                            y1, h, symbol_id="near-set-cutoff-axis0")
        op2 = build_weyl_1d(lambda s, xi: cutoff.gamma((s + fy.d1(xi)) / sh),
                            y2, h, symbol_id="near-set-cutoff-axis1")
    return op1, op2


def project_frame(ops: Spectral2D, f: ComplexField,
                  cutoff: CutoffProfile) -> SemiclassicalFrame:
    """Build the rescaled frame at the field's time and split off v_near."""
    t = f.t
    if t < 1.0:
        raise ConfigError("frames are defined for t >= 1")
    op1, op2 = projector_ops(ops, t, cutoff)
    v = t * f.data
    v_near = weyl_apply_separable(op1, op2, v)
    return SemiclassicalFrame(
        t=t, h=1.0 / t, y1=op1.y, y2=op2.y,
        dy=(op1.dy, op2.dy), v=v, v_near=v_near, v_far=v - v_near)


# ---------------------------------------------------------------------------
# leading-order symbol composition and scaling measurements
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PhaseSpaceSymbol:
    """Scalar symbol on 1D phase space with analytic partials."""

    val: Callable[[np.ndarray, np.ndarray], np.ndarray]
    dx: Callable[[np.ndarray, np.ndarray], np.ndarray]
    dxi: Callable[[np.ndarray, np.ndarray], np.ndarray]
    name: str = ""


def moyal_leading(a: PhaseSpaceSymbol, b: PhaseSpaceSymbol,
                  h: float) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """ab + (ih/2) * (da/dx db/dxi - da/dxi db/dx) as a callable symbol."""

    def lead(x, xi):
        return (a.val(x, xi) * b.val(x, xi)
                + 0.5j * h * (a.dx(x, xi) * b.dxi(x, xi)
                              - a.dxi(x, xi) * b.dx(x, xi)))

    return lead


@dataclass(frozen=True)
class RemainderScaling:
    h_list: tuple[float, ...]
    norms: tuple[float, ...]
    fit: FitResult | None


def restriction_matrix(y: np.ndarray, band=(0.25, 0.55),
                       win=(0.4, 0.72)) -> np.ndarray:
    """Smooth localize-then-band-limit matrix for composition measurements.

    A torus discretization only represents the phase-space calculus on
    states supported inside the box and well below the Nyquist frequency;
    outside that sector, non-periodic symbols (coordinate sawtooth, linear
    frequency) generate O(h) wrap artifacts that would mask the genuine
    O(h^2) composition remainder.  Both the spatial window and the spectral
    mask use the C-infinity bump profile so their own tails sit at the
    rounding floor.
    """
    n = y.size
    dy = y[1] - y[0]
    L = abs(y[0])
    W = CutoffProfile(r1=win[0] * L, r2=win[1] * L).gamma(y)
    eta = 2.0 * np.pi * sfft.fftfreq(n, d=dy)
    nyq = np.pi / dy
    mask = CutoffProfile(r1=band[0] * nyq, r2=band[1] * nyq).gamma(eta)
    F = sfft.fft(np.eye(n), axis=0)
    P = (F.conj().T @ (mask[:, None] * F)) / n
    return P @ (W[:, None] * np.eye(n))


def moyal_remainder_scaling(a: PhaseSpaceSymbol, b: PhaseSpaceSymbol,
                            h_list, y: np.ndarray,
                            floor: float = 1e-12) -> RemainderScaling:
    """L2 -> L2 norm of G(a)G(b) - G(leading) across h, with a log-log fit.

    The defect is measured on the windowed band-limited sector (see
    restriction_matrix) by power iteration.  Raises DegenerateFit when
    every norm sits at the quadrature floor (composition exact, e.g.
    bilinear symbols).
    """
    h_list = tuple(float(h) for h in h_list)
    B = restriction_matrix(y)
    norms = []
    for h in h_list:
        Ka = build_weyl_1d(a.val, y, h, symbol_id=a.name or "a")
        Kb = build_weyl_1d(b.val, y, h, symbol_id=b.name or "b")
        Kl = build_weyl_1d(moyal_leading(a, b, h), y, h, symbol_id="leading")
        M = (Ka.dy ** 2) * (Ka.kernel @ Kb.kernel) - Kl.dy * Kl.kernel
        norms.append(_matrix_norm_l2(B @ M @ B))
    norms = tuple(norms)
    if max(norms) < floor:
        raise DegenerateFit(f"remainder at quadrature floor (max {max(norms):.2e})")
    fit = fit_decay_rate(h_list, norms, min_points=3, min_decades=1.0)
    return RemainderScaling(h_list, norms, fit)


@dataclass(frozen=True)
class NormScaling:
    h_list: tuple[float, ...]
    norms: tuple[float, ...]
    fit: FitResult
    constant_spread: float


def operator_norm_scaling(family: Callable[[float], Callable],
                          h_list, y: np.ndarray,
                          norm_pair: str = "l2_l2") -> NormScaling:
    """Measure ||G(a_h)|| across h for a symbol family a_h.

    norm_pair 'l2_l2' uses power iteration and 'l2_linf' the exact
    max-row-norm formula, both per axis.  The '_2d' variants report the
    tensor-square: for separable operators the planar norm is exactly the
    product of the axis norms, and the planar L2 -> Linf bound is the one
    that scales like h^{-1/2} (each axis contributes h^{-1/4}).
    """
    if norm_pair not in ("l2_l2", "l2_linf", "l2_l2_2d", "l2_linf_2d"):
        raise ConfigError(f"unknown norm pair {norm_pair!r}")
    h_list = tuple(float(h) for h in h_list)
    square = norm_pair.endswith("_2d")
    norms = []
    for h in h_list:
        op = build_weyl_1d(family(h), y, h, symbol_id=f"family(h={h:g})")
        val = (op.norm_l2_to_l2() if norm_pair.startswith("l2_l2")
               else op.norm_l2_to_linf())
        norms.append(val * val if square else val)
    norms = tuple(norms)
    fit = fit_decay_rate(h_list, norms, min_points=3, min_decades=1.0)
    spread = max(norms) / min(norms)
    return NormScaling(h_list, norms, fit, float(spread))
