"""Admissible dispersion symbols and stationary-phase tables.

A 2D symbol is a sum F(xi) = F1(xi1) + F2(xi2) of strictly convex branches
with F_k'' pinched between positive constants.  For each branch the map
x -> freq(x) solves x + F'(freq) = 0 (the frequency whose group line reaches
position x/t at time t); the associated ray phase is
w(x) = x . freq(x) + F(freq(x)), assembled per axis.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import BracketFailure, ConfigError, DerivativeMismatch, NonElliptic

DEFAULT_TABLE_SPACING = 0.05
_ROOT_RTOL = 1e-13


@dataclass(frozen=True)
class DispersionSymbol1D:
    """One convex branch F_k with analytic derivatives and convexity bounds."""

    eval: Callable[[np.ndarray], np.ndarray]
    d1: Callable[[np.ndarray], np.ndarray]
    d2: Callable[[np.ndarray], np.ndarray]
    d3: Callable[[np.ndarray], np.ndarray]
    c_low: float
    d_high: float
    name: str

    def __post_init__(self):
        if not (0.0 < self.c_low <= self.d_high):
            raise ConfigError(f"symbol {self.name}: need 0 < c_low <= d_high")


@dataclass(frozen=True)
class DispersionSymbol2D:
    """Separable 2D symbol; separability is structural, never approximated."""

    fx: DispersionSymbol1D
    fy: DispersionSymbol1D

    def eval(self, xi1, xi2):
        return self.fx.eval(xi1) + self.fy.eval(xi2)

    @property
    def branches(self):
        return (self.fx, self.fy)

    @property
    def name(self):
        return f"{self.fx.name}+{self.fy.name}"


# ---------------------------------------------------------------------------
# built-in symbols
# ---------------------------------------------------------------------------

def quadratic(a: float = 1.0) -> DispersionSymbol1D:
    """F(xi) = a*xi^2 with a in [0.5, 2]; the exactly solvable case."""
    if not (0.5 <= a <= 2.0):
        raise ConfigError(f"quadratic coefficient a={a} outside [0.5, 2]")
    return DispersionSymbol1D(
        eval=lambda xi: a * xi * xi,
        d1=lambda xi: 2.0 * a * xi,
        d2=lambda xi: 2.0 * a * np.ones_like(np.asarray(xi, dtype=float)),
        d3=lambda xi: np.zeros_like(np.asarray(xi, dtype=float)),
        c_low=2.0 * a,
        d_high=2.0 * a,
        name=f"quadratic(a={a:g})" if a != 1.0 else "quadratic",
    )


def quadrel() -> DispersionSymbol1D:
    """F(xi) = xi^2 + sqrt(1+xi^2); strictly non-quadratic, F'' in (2, 3]."""

    def _e(xi):
        xi = np.asarray(xi, dtype=float)
        return xi * xi + np.sqrt(1.0 + xi * xi)

    def _d1(xi):
        xi = np.asarray(xi, dtype=float)
        return 2.0 * xi + xi / np.sqrt(1.0 + xi * xi)

    def _d2(xi):
        xi = np.asarray(xi, dtype=float)
        return 2.0 + (1.0 + xi * xi) ** -1.5

    def _d3(xi):
        xi = np.asarray(xi, dtype=float)
        return -3.0 * xi * (1.0 + xi * xi) ** -2.5

    return DispersionSymbol1D(eval=_e, d1=_d1, d2=_d2, d3=_d3,
                              c_low=2.0, d_high=3.0, name="quadrel")


def make_symbol(name: str, coeffs: dict | None = None) -> DispersionSymbol1D:
    """Build a branch by name + coefficient map (run-configuration hook)."""
    coeffs = coeffs or {}
    if name == "quadratic":
        return quadratic(float(coeffs.get("a", 1.0)))
    if name == "quadrel":
        return quadrel()
    raise ConfigError(f"unknown symbol name {name!r}")


def make_symbol2d(spec: dict) -> DispersionSymbol2D:
    """spec = {"name": ..., "coeffs": {...}} or per-axis {"x": {...}, "y": {...}}."""
    if "x" in spec or "y" in spec:
        fx = make_symbol(spec["x"]["name"], spec["x"].get("coeffs"))
        fy = make_symbol(spec["y"]["name"], spec["y"].get("coeffs"))
        return DispersionSymbol2D(fx, fy)
    branch = make_symbol(spec["name"], spec.get("coeffs"))
    return DispersionSymbol2D(branch, branch)


# ---------------------------------------------------------------------------
# ellipticity validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EllipticityReport:
    name: str
    band: tuple[float, float]
    n_samples: int
    d2_min: float
    d2_max: float
    fd_max_err: dict[str, float]
    passed: bool


def validate_ellipticity(sym: DispersionSymbol1D, band: tuple[float, float],
                         n_samples: int = 101, fd_delta: float = 1e-5,
                         fd_tol: float = 1e-6) -> EllipticityReport:
    """Sample F'' over the band and cross-check analytic derivatives.

    Raises NonElliptic when F'' <= 0 somewhere, DerivativeMismatch when a
    central difference disagrees with the next analytic derivative.  A report
    with passed=False (but no exception) means F'' is positive yet escapes
    the declared [c_low, d_high] pinch.
    """
    lo, hi = float(band[0]), float(band[1])
    if not (hi > lo) or n_samples < 2:
        raise ConfigError("band must be nonempty and n_samples >= 2")
    xi = np.linspace(lo, hi, int(n_samples))
    d2 = np.asarray(sym.d2(xi), dtype=float)
    d2_min, d2_max = float(d2.min()), float(d2.max())
    if d2_min <= 0.0:
        raise NonElliptic(f"{sym.name}: F'' <= 0 on [{lo}, {hi}] (min {d2_min:g})")

    fd_err = {}
    for tag, base, deriv in (("d1", sym.eval, sym.d1),
                             ("d2", sym.d1, sym.d2),
                             ("d3", sym.d2, sym.d3)):
        fd = (np.asarray(base(xi + fd_delta), dtype=float)
              - np.asarray(base(xi - fd_delta), dtype=float)) / (2.0 * fd_delta)
        ana = np.asarray(deriv(xi), dtype=float)
        err = np.abs(fd - ana) / (1.0 + np.abs(ana))
        fd_err[tag] = float(err.max())
        if fd_err[tag] > fd_tol:
            raise DerivativeMismatch(
                f"{sym.name}: {tag} finite-difference error {fd_err[tag]:.3e} > {fd_tol:g}")

    passed = (sym.c_low - 1e-12 <= d2_min) and (d2_max <= sym.d_high + 1e-12)
    return EllipticityReport(sym.name, (lo, hi), int(n_samples),
                             d2_min, d2_max, fd_err, passed)


# ---------------------------------------------------------------------------
# stationary-frequency root
# ---------------------------------------------------------------------------

def stationary_phase_root(sym: DispersionSymbol1D, x, xi_max: float = 1e6):
    """Solve x + F'(xi) = 0; unique by strict monotonicity of F'.

    The pinch c_low <= F'' <= d_high gives an exact bracket around the root,
    refined by Newton with bisection fallback.  Works on scalars or arrays.
    """
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    target = -x_arr
    b0 = float(sym.d1(np.array([0.0]))[0] if np.ndim(sym.d1(0.0)) else sym.d1(0.0))
    span = target - b0
    lo = np.where(span >= 0, span / sym.d_high, span / sym.c_low)
    hi = np.where(span >= 0, span / sym.c_low, span / sym.d_high)
    if np.any(np.maximum(np.abs(lo), np.abs(hi)) > xi_max):
        bad = int(np.argmax(np.maximum(np.abs(lo), np.abs(hi))))
        raise BracketFailure(
            f"{sym.name}: root for x={x_arr[bad]:g} outside |xi| <= {xi_max:g}")

    xi = 0.5 * (lo + hi)
    tol = _ROOT_RTOL * (1.0 + np.abs(x_arr))
    for _ in range(100):
        r = np.asarray(sym.d1(xi), dtype=float) + x_arr
        done = np.abs(r) <= tol
        if done.all():
            break
        # keep the bracket valid: F' is increasing, so r<0 means xi too small
        lo = np.where(r < 0, xi, lo)
        hi = np.where(r > 0, xi, hi)
        step = r / np.asarray(sym.d2(xi), dtype=float)
        cand = xi - step
        inside = (cand > lo) & (cand < hi)
        xi = np.where(done, xi, np.where(inside, cand, 0.5 * (lo + hi)))
    else:  # pragma: no cover - Newton+bisection always converges here
        raise BracketFailure(f"{sym.name}: root iteration stalled")
    return xi if np.ndim(x) else float(xi[0])


# ---------------------------------------------------------------------------
# phase table
# ---------------------------------------------------------------------------

@dataclass
class PhaseTable:
    """Per-axis tables of the stationary frequency and the ray phase.

    freq[k]      stationary frequency at axis_samples[k]
    freq_deriv[k] its derivative, equal to -1/F_k''(freq)
    phase_split[k] w_k(x) = x*freq + F_k(freq); w(x) = w_1(x1) + w_2(x2)
    Off-node queries use cubic splines (node spacing <= 0.05 keeps the
    interpolation error under the root tolerance budget).
    """

    sym2d: DispersionSymbol2D
    axis_samples: tuple[np.ndarray, np.ndarray]
    freq: tuple[np.ndarray, np.ndarray]
    freq_deriv: tuple[np.ndarray, np.ndarray]
    phase_split: tuple[np.ndarray, np.ndarray]
    _splines: dict = field(default_factory=dict, repr=False)

    def _spline(self, kind: str, k: int) -> CubicSpline:
        key = (kind, k)
        if key not in self._splines:
            data = {"freq": self.freq, "freq_deriv": self.freq_deriv,
                    "phase": self.phase_split}[kind][k]
            self._splines[key] = CubicSpline(self.axis_samples[k], data)
        return self._splines[key]

    def freq_at(self, k: int, x):
        return self._spline("freq", k)(x)

    def freq_deriv_at(self, k: int, x):
        return self._spline("freq_deriv", k)(x)

    def phase_axis(self, k: int, x):
        return self._spline("phase", k)(x)

    def phase(self, x1, x2):
        """w(x) on the tensor grid x1 (x) x2 (broadcasts per axis)."""
        w1 = self.phase_axis(0, np.asarray(x1))
        w2 = self.phase_axis(1, np.asarray(x2))
        return w1[..., :, None] + w2[..., None, :]

    @property
    def span(self) -> tuple[float, float]:
        a = self.axis_samples
        return (float(max(a[0][0], a[1][0])), float(min(a[0][-1], a[1][-1])))


def build_phase_table(sym2d: DispersionSymbol2D,
                      axes: tuple[np.ndarray, np.ndarray],
                      xi_max: float = 1e6) -> PhaseTable:
    """Tabulate freq, freq', and the split ray phase on per-axis sample arrays."""
    freqs, derivs, phases = [], [], []
    for k, (branch, ax) in enumerate(zip(sym2d.branches, axes)):
        ax = np.asarray(ax, dtype=float)
        if ax.ndim != 1 or ax.size < 4 or np.any(np.diff(ax) <= 0):
            raise ConfigError(f"axis {k}: samples must be strictly increasing, >= 4")
        try:
            f = stationary_phase_root(branch, ax, xi_max=xi_max)
        except BracketFailure as exc:
            raise BracketFailure(f"axis {k}: {exc}") from exc
        freqs.append(f)
        derivs.append(-1.0 / np.asarray(branch.d2(f), dtype=float))
        phases.append(ax * f + np.asarray(branch.eval(f), dtype=float))
    return PhaseTable(sym2d, (axes[0].astype(float), axes[1].astype(float)),
                      (freqs[0], freqs[1]), (derivs[0], derivs[1]),
                      (phases[0], phases[1]))


def table_axis(extent: float, spacing: float = DEFAULT_TABLE_SPACING) -> np.ndarray:
    """Symmetric sample axis [-extent, extent] at the default table spacing."""
    n = int(np.ceil(extent / spacing))
    return np.linspace(-n * spacing, n * spacing, 2 * n + 1)
