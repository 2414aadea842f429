"""Long-time asymptotics: accumulated nonlinear phase, reduced amplitude,
limit profiles, and every residual/rate measurement.

Slowly varying quantities (moduli, phase-stripped amplitudes) live on a
fixed coarse diagnostic grid; the fast ray phase exp(-i t w(y)) is always
evaluated analytically on the native scaled grid before anything is
interpolated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import _kernels
from .dispersion import PhaseTable
from .errors import (BranchMismatch, ConfigError, ExtrapolationError,
                     NotConverged, PhaseUnderresolved, PositivityViolation)
from .fitting import FitResult, cauchy_pairs, fit_decay_rate
from .grid import ComplexField, Spectral2D, l2_norm
from .weyl import CutoffProfile, SemiclassicalFrame, project_frame


@dataclass(frozen=True)
class DiagnosticGrid:
    """Fixed coarse y-grid [-Y, Y]^2 carrying the slow diagnostics."""

    n: int
    Y: float

    @property
    def y(self) -> np.ndarray:
        return np.linspace(-self.Y, self.Y, self.n)

    @property
    def dy(self) -> float:
        return 2.0 * self.Y / (self.n - 1)

    @property
    def cell_area(self) -> float:
        return self.dy ** 2

    def l2(self, arr: np.ndarray) -> float:
        return float(np.sqrt(self.cell_area * np.sum(np.abs(arr) ** 2)))


def _map_complex(data: np.ndarray, ix: np.ndarray, iy: np.ndarray,
                 order: int = 3) -> np.ndarray:
    re = ndimage.map_coordinates(data.real, [ix, iy], order=order, mode="nearest")
    im = ndimage.map_coordinates(data.imag, [ix, iy], order=order, mode="nearest")
    return re + 1j * im


def interp_frame_to_diag(arr: np.ndarray, frame: SemiclassicalFrame,
                         diag: DiagnosticGrid, order: int = 3) -> np.ndarray:
    """Sample a native-grid array on the diagnostic nodes (cubic)."""
    if diag.Y > frame.y1[-1] or diag.Y > frame.y2[-1]:
        raise ExtrapolationError(
            f"diagnostic window Y={diag.Y:g} exceeds native extent "
            f"{frame.y1[-1]:g} at t={frame.t:g}")
    ix = (diag.y - frame.y1[0]) / frame.dy[0]
    iy = (diag.y - frame.y2[0]) / frame.dy[1]
    IX, IY = np.meshgrid(ix, iy, indexing="ij")
    if np.iscomplexobj(arr):
        return _map_complex(arr, IX, IY, order)
    return ndimage.map_coordinates(arr, [IX, IY], order=order, mode="nearest")


@dataclass
class PhaseAccumulator:
    """Trapezoidal integral of s^-1 * integrand in the log-s variable."""

    values: np.ndarray
    t_last: float = 1.0
    rule: str = "log-trapezoid"
    _last_integrand: np.ndarray | None = None

    def update(self, integrand: np.ndarray, s_cur: float) -> None:
        if s_cur < self.t_last:
            raise ConfigError("accumulator times must be nondecreasing")
        if self._last_integrand is not None and s_cur > self.t_last:
            dlog = math.log(s_cur) - math.log(self.t_last)
            self.values = self.values + 0.5 * dlog * (self._last_integrand
                                                      + integrand)
        self._last_integrand = integrand.copy()
        self.t_last = s_cur


def compute_z(frame: SemiclassicalFrame, table: PhaseTable,
              phi_values: np.ndarray, lam: complex,
              diag: DiagnosticGrid) -> np.ndarray:
    """Reduced amplitude z = v_near * exp(-i(w(y) t + lam * Phi)) on diag.

    The ray-phase factor is applied on the native grid where it is exact;
    the remaining slowly varying product is then interpolated and the
    nonlinear phase (known on the diagnostic grid) stripped there.
    """
    w1 = np.asarray(table.phase_axis(0, frame.y1), dtype=float)
    w2 = np.asarray(table.phase_axis(1, frame.y2), dtype=float)
    stripped = _kernels.phase_twist(frame.v_near, w1, w2, frame.t)
    z_diag = interp_frame_to_diag(stripped, frame, diag)
    return z_diag * np.exp(-1j * lam * phi_values)


def check_phase_resolution(table: PhaseTable, diag: DiagnosticGrid,
                           dx: tuple[float, float]) -> None:
    """Native-grid Nyquist check for the ray phase gradient.

    The scaled grid has spacing dx_k / t, so resolving t*|freq| at all
    times reduces to max |freq| over the window <= pi/dx_k per axis.
    """
    for k in (0, 1):
        fmax = float(np.max(np.abs(table.freq_at(k, diag.y))))
        nyq = np.pi / dx[k]
        if fmax > 0.98 * nyq:
            raise PhaseUnderresolved(
                f"axis {k}: ray frequency {fmax:.3f} vs grid Nyquist {nyq:.3f}")


class ScatteringDriver:
    """Checkpoint callback accumulating the asymptotic diagnostics.

    Collects, per checkpoint: the reduced amplitude on the diagnostic grid,
    ||v_far||_inf, and max Phi; maintains the nonlinear-phase accumulator
    and (for Im lam > 0) the dissipative-phase integral.
    """

    def __init__(self, ops: Spectral2D, table: PhaseTable,
                 cutoff: CutoffProfile, diag: DiagnosticGrid, lam: complex):
        check_phase_resolution(table, diag, ops.grid.dx)
        self.ops = ops
        self.table = table
        self.cutoff = cutoff
        self.diag = diag
        self.lam = lam
        self.phi = PhaseAccumulator(values=np.zeros((diag.n, diag.n)))
        self.diss = PhaseAccumulator(values=np.zeros((diag.n, diag.n)))
        self.times: list[float] = []
        self.z_series: list[np.ndarray] = []

    def __call__(self, fld: ComplexField, traj) -> None:
        frame = project_frame(self.ops, fld, self.cutoff)
        vnear_diag = interp_frame_to_diag(np.abs(frame.v_near), frame, self.diag)
        self.phi.update(vnear_diag, frame.t)
        z = compute_z(frame, self.table, self.phi.values, self.lam, self.diag)
        if self.lam.imag > 0:
            self.diss.update(self.lam.imag * np.abs(z), frame.t)
        self.times.append(frame.t)
        self.z_series.append(z)
        traj.add_extra("vlc_linf", float(np.max(np.abs(frame.v_far))))
        traj.add_extra("vl_linf", float(np.max(np.abs(frame.v_near))))
        traj.add_extra("phi_max", float(np.max(self.phi.values)))


# ---------------------------------------------------------------------------
# limit extraction
# ---------------------------------------------------------------------------

@dataclass
class ScatteringProfile:
    z_plus: np.ndarray
    diag: DiagnosticGrid
    lam: complex
    t_trunc: float
    phi_plus: np.ndarray | None = None
    psi_plus: np.ndarray | None = None
    phi_tail_bound: float = float("nan")
    cauchy_linf: FitResult | None = None
    cauchy_l2: FitResult | None = None
    uncertainty_linf: float = float("nan")


def extract_z_plus(times, z_series, diag: DiagnosticGrid, lam: complex,
                   t_lo: float = 10.0, min_decades: float = 0.5,
                   fail_slope: float = -0.2) -> ScatteringProfile:
    """Freeze z(t_max) as the limit amplitude and fit the Cauchy rates.

    The Cauchy series pairs checkpoints (t, ~2t) with both members inside
    [t_lo, t_max]; raises NotConverged when the sup-norm differences decay
    slower than t^fail_slope.
    """
    t = np.asarray(times, dtype=float)
    if np.sum(t > t_lo) < 5:
        raise ConfigError("need at least 5 checkpoints past t_lo")
    pairs = [(i, j) for (i, j) in cauchy_pairs(t) if t[i] >= t_lo]
    if len(pairs) < 5:
        raise ConfigError("not enough (t, 2t) checkpoint pairs")
    base = np.array([t[i] for i, _ in pairs])
    d_inf = np.array([np.max(np.abs(z_series[j] - z_series[i]))
                      for i, j in pairs])
    d_l2 = np.array([diag.l2(z_series[j] - z_series[i]) for i, j in pairs])
    fit_inf = fit_decay_rate(base, np.maximum(d_inf, 1e-300),
                             min_points=5, min_decades=min_decades)
    fit_l2 = fit_decay_rate(base, np.maximum(d_l2, 1e-300),
                            min_points=5, min_decades=min_decades)
    if fit_inf.slope > fail_slope:
        raise NotConverged(
            f"sup-norm Cauchy slope {fit_inf.slope:.3f} > {fail_slope:g}")
    half_idx = int(np.argmin(np.abs(np.log(t / (t[-1] / 2.0)))))
    return ScatteringProfile(
        z_plus=z_series[-1].copy(), diag=diag, lam=lam, t_trunc=float(t[-1]),
        cauchy_linf=fit_inf, cauchy_l2=fit_l2,
        uncertainty_linf=float(np.max(np.abs(z_series[-1] - z_series[half_idx]))))


def compute_phi_plus(profile: ScatteringProfile, phi_final: np.ndarray) -> None:
    """Truncated phase correction for the conservative branch.

    int_1^tmax s^-1 (|v_near| - |z_plus|) ds equals Phi(tmax) -
    |z_plus| log tmax exactly, so no extra storage is needed.  The reported
    tail bound integrates the fitted Cauchy envelope past tmax.
    """
    if profile.lam.imag != 0.0:
        raise BranchMismatch("phi_plus belongs to the Im lam = 0 branch")
    profile.phi_plus = phi_final - np.abs(profile.z_plus) * math.log(profile.t_trunc)
    fit = profile.cauchy_linf
    if fit is not None and fit.slope < -1e-3:
        c = math.exp(fit.intercept) / (1.0 - 2.0 ** fit.slope)
        profile.phi_tail_bound = float(
            c * profile.t_trunc ** fit.slope / (-fit.slope))


def compute_psi_plus_and_S(profile: ScatteringProfile, diss_final: np.ndarray,
                           t) -> tuple[np.ndarray, np.ndarray]:
    """Dissipative phase correction and the logarithmic phase S(t, .).

    psi_plus is the truncated integral Im(lam) int s^-1 (|z| - |z_plus|) ds
    = J(tmax) - Im(lam)|z_plus| log tmax; S follows by the closed form, with
    the positivity floor enforced wherever it is evaluated.
    """
    im = profile.lam.imag
    if im <= 0.0:
        raise BranchMismatch("psi_plus/S belong to the Im lam > 0 branch")
    if profile.psi_plus is None:
        if diss_final is None:
            raise ConfigError("first call needs the accumulated |z| integral")
        profile.psi_plus = (diss_final
                            - im * np.abs(profile.z_plus) * math.log(profile.t_trunc))
    arg = 1.0 + im * np.abs(profile.z_plus) * np.log(t) + profile.psi_plus
    if np.min(arg) < 0.5:
        raise PositivityViolation(
            f"1 + Im(lam)|z+|log t + psi+ dipped to {np.min(arg):.3f} < 0.5")
    return profile.psi_plus, np.log(arg) / im


def log_phase_argument(profile: ScatteringProfile, t) -> np.ndarray:
    im = profile.lam.imag
    return 1.0 + im * np.abs(profile.z_plus) * np.log(t) + profile.psi_plus


def modification_factor_pair(profile: ScatteringProfile,
                             t: float) -> tuple[np.ndarray, np.ndarray]:
    """exp(i lam S) computed directly and via the explicit quotient form."""
    lam = profile.lam
    if lam.imag <= 0.0 or profile.psi_plus is None:
        raise BranchMismatch("modification factor needs the dissipative branch")
    arg = log_phase_argument(profile, t)
    if np.min(arg) < 0.5:
        raise PositivityViolation(f"argument min {np.min(arg):.3f} < 0.5")
    S = np.log(arg) / lam.imag
    direct = np.exp(1j * lam * S)
    explicit = np.exp(1j * (lam.real / lam.imag) * np.log(arg)) / arg
    return direct, explicit


# ---------------------------------------------------------------------------
# model fields and residuals
# ---------------------------------------------------------------------------

def _diag_to_points(arr: np.ndarray, diag: DiagnosticGrid, y1: np.ndarray,
                    y2: np.ndarray, order: int = 3) -> np.ndarray:
    """Sample a diagnostic-grid array on the tensor mesh y1 x y2 (0 outside)."""
    ix = (y1 + diag.Y) / diag.dy
    iy = (y2 + diag.Y) / diag.dy
    inside1 = (y1 >= -diag.Y) & (y1 <= diag.Y)
    inside2 = (y2 >= -diag.Y) & (y2 <= diag.Y)
    IX, IY = np.meshgrid(np.clip(ix, 0, diag.n - 1), np.clip(iy, 0, diag.n - 1),
                         indexing="ij")
    if np.iscomplexobj(arr):
        vals = _map_complex(arr, IX, IY, order)
    else:
        vals = ndimage.map_coordinates(arr, [IX, IY], order=order, mode="nearest")
    return vals * (inside1[:, None] & inside2[None, :])


def build_model_field(ops: Spectral2D, profile: ScatteringProfile,
                      table: PhaseTable, t: float) -> ComplexField:
    """Asymptotic model (1/t) e^{i(t w(x/t) + lam * phase)} z_plus(x/t).

    phase is phi_plus + |z_plus| log t on the conservative branch and
    S(t, .) on the dissipative branch.
    """
    g = ops.grid
    y1 = g.axis(0) / t
    y2 = g.axis(1) / t
    w = (np.asarray(table.phase_axis(0, y1))[:, None]
         + np.asarray(table.phase_axis(1, y2))[None, :])
    zp = _diag_to_points(profile.z_plus, profile.diag, y1, y2)
    if profile.lam.imag == 0.0:
        if profile.phi_plus is None:
            raise ConfigError("phi_plus not computed")
        ph = _diag_to_points(profile.phi_plus, profile.diag, y1, y2)
        slow = ph + np.abs(zp) * math.log(t)
    else:
        if profile.psi_plus is None:
            raise ConfigError("psi_plus not computed")
        arg = 1.0 + (profile.lam.imag * np.abs(zp) * math.log(t)
                     + _diag_to_points(profile.psi_plus, profile.diag, y1, y2))
        if np.min(arg) < 0.5:
            raise PositivityViolation(f"model arg min {np.min(arg):.3f} < 0.5")
        slow = np.log(arg) / profile.lam.imag
    data = (1.0 / t) * np.exp(1j * (t * w + profile.lam * slow)) * zp
    return ComplexField(g, data.astype(np.complex128), t)


def profile_residual(ops: Spectral2D, fld: ComplexField,
                     profile: ScatteringProfile, table: PhaseTable,
                     mass_tol: float = 1e-10) -> tuple[float, float]:
    """(sup, L2) distance between the solution and the asymptotic model."""
    t = fld.t
    g = ops.grid
    y1 = g.axis(0) / t
    y2 = g.axis(1) / t
    out1 = (np.abs(y1) > profile.diag.Y)
    out2 = (np.abs(y2) > profile.diag.Y)
    total = float(np.sum(np.abs(fld.data) ** 2))
    if total > 0.0:
        out_mass = (np.sum(np.abs(fld.data[out1, :]) ** 2)
                    + np.sum(np.abs(fld.data[np.ix_(~out1, out2)]) ** 2)) / total
        if out_mass > mass_tol:
            raise ExtrapolationError(
                f"u carries mass {out_mass:.2e} outside the diagnostic window")
    model = build_model_field(ops, profile, table, t)
    diff = fld.data - model.data
    linf = float(np.max(np.abs(diff)))
    l2 = float(np.sqrt(g.cell_area * np.sum(np.abs(diff) ** 2)))
    return linf, l2


# ---------------------------------------------------------------------------
# limit datum u_plus (two routes) and the scattering check
# ---------------------------------------------------------------------------

def u_plus_quadrature(profile: ScatteringProfile, table: PhaseTable,
                      x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    """Direct quadrature of the defining oscillatory integral on an
    x-subset; separability collapses it to two dense matrix products."""
    diag = profile.diag
    y = diag.y
    f1 = np.asarray(table.freq_at(0, y), dtype=float)
    f2 = np.asarray(table.freq_at(1, y), dtype=float)
    c1 = np.asarray(table.sym2d.fx.d2(f1), dtype=float)
    c2 = np.asarray(table.sym2d.fy.d2(f2), dtype=float)
    g = profile.z_plus / np.sqrt(c1[:, None] * c2[None, :])
    A1 = _kernels.u_plus_phase(np.asarray(x1, dtype=float), f1)
    A2 = _kernels.u_plus_phase(np.asarray(x2, dtype=float), f2)
    return (-1j / (2.0 * np.pi)) * diag.cell_area * (A1 @ g @ A2.T)


def u_plus_spectral(ops: Spectral2D, profile: ScatteringProfile,
                    table: PhaseTable) -> ComplexField:
    """Full-grid u_plus via the exact change of variables xi = freq(y).

    Substituting y = -F'(xi) turns the quadrature into a plain inverse
    Fourier transform of -i sqrt(F1''(xi1) F2''(xi2)) z_plus(-F'(xi)).
    """
    diag = profile.diag
    y_img1 = -np.asarray(ops.sym.fx.d1(ops.eta1), dtype=float)
    y_img2 = -np.asarray(ops.sym.fy.d1(ops.eta2), dtype=float)
    zp = _diag_to_points(profile.z_plus, diag, y_img1, y_img2)
    amp1 = np.sqrt(np.asarray(ops.sym.fx.d2(ops.eta1), dtype=float))
    amp2 = np.sqrt(np.asarray(ops.sym.fy.d2(ops.eta2), dtype=float))
    uhat = -1j * amp1[:, None] * amp2[None, :] * zp
    return ops.from_fourier(uhat, t=1.0)


def scattering_residual(ops: Spectral2D, fld: ComplexField,
                        u_plus: ComplexField, profile: ScatteringProfile,
                        table: PhaseTable) -> float:
    """L2 distance between u(t) and the phase-corrected free wave."""
    t = fld.t
    g = ops.grid
    free = ops.apply_multiplier(u_plus, np.exp(1j * t * ops.F_modes))
    y1 = g.axis(0) / t
    y2 = g.axis(1) / t
    zp_abs = np.abs(_diag_to_points(profile.z_plus, profile.diag, y1, y2))
    if profile.lam.imag == 0.0:
        ph = _diag_to_points(profile.phi_plus, profile.diag, y1, y2)
        factor = np.exp(1j * profile.lam * (ph + zp_abs * math.log(t)))
    else:
        psi = _diag_to_points(profile.psi_plus, profile.diag, y1, y2)
        arg = np.maximum(1.0 + profile.lam.imag * zp_abs * math.log(t) + psi, 0.5)
        factor = np.exp(1j * profile.lam * np.log(arg) / profile.lam.imag)
    diff = fld.data - factor * free.data
    return float(np.sqrt(g.cell_area * np.sum(np.abs(diff) ** 2)))


# ---------------------------------------------------------------------------
# dissipative sup-norm series
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DissipativeSeries:
    times: np.ndarray
    values: np.ndarray
    target: float
    last: float
    trend_improved: bool


def dissipative_limit_series(times, linf_series, lam: complex) -> DissipativeSeries:
    """(t log t)||u||_inf over checkpoints with t >= e, plus the trend."""
    if lam.imag <= 0.0:
        raise BranchMismatch("dissipative series needs Im lam > 0")
    t = np.asarray(times, dtype=float)
    vals = np.asarray(linf_series, dtype=float)
    keep = t >= math.e
    t, vals = t[keep], vals[keep]
    if t.size < 3:
        raise ConfigError("need at least 3 checkpoints past t = e")
    series = t * np.log(t) * vals
    target = 1.0 / lam.imag
    i_tenth = int(np.argmin(np.abs(np.log(t / (t[-1] / 10.0)))))
    trend = abs(series[-1] - target) < abs(series[i_tenth] - target)
    return DissipativeSeries(t, series, target, float(series[-1]), bool(trend))
