"""Log-log decay-rate fits shared by the diagnostics and the CLI."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NonPositiveData


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    stderr: float
    n_points: int
    t_range: tuple[float, float]


def fit_decay_rate(t, m, min_points: int = 5,
                   min_decades: float = 1.0) -> FitResult:
    """Least-squares line on (log t, log m); stderr from the residuals.

    min_decades can be relaxed by callers that fit spec-pinned short
    windows; the default guards routine rate tables.
    """
    t = np.asarray(t, dtype=float)
    m = np.asarray(m, dtype=float)
    if t.size != m.size:
        raise ConfigError("series length mismatch")
    if np.any(m <= 0.0):
        raise NonPositiveData("series has non-positive entries")
    if t.size < min_points:
        raise ConfigError(f"need >= {min_points} points, got {t.size}")
    decades = np.log10(t.max() / t.min())
    if decades < min_decades - 1e-12:
        raise ConfigError(
            f"t range spans {decades:.2f} decades < required {min_decades:g}")

    x = np.log(t)
    y = np.log(m)
    A = np.vstack([x, np.ones_like(x)]).T
    coef, res, _, _ = np.linalg.lstsq(A, y, rcond=None)
    slope, intercept = float(coef[0]), float(coef[1])
    if t.size > 2:
        rss = float(res[0]) if res.size else float(np.sum((A @ coef - y) ** 2))
        sxx = float(np.sum((x - x.mean()) ** 2))
        stderr = np.sqrt(rss / (t.size - 2) / sxx) if sxx > 0 else float("inf")
    else:
        stderr = float("inf")
    return FitResult(slope, intercept, float(stderr), int(t.size),
                     (float(t.min()), float(t.max())))


def cauchy_pairs(times: np.ndarray, ratio: float = 2.0,
                 rtol: float = 0.12) -> list[tuple[int, int]]:
    """Index pairs (i, j) with t_j closest to ratio*t_i within rtol."""
    t = np.asarray(times, dtype=float)
    pairs = []
    for i in range(t.size):
        target = ratio * t[i]
        j = int(np.argmin(np.abs(np.log(t / target))))
        if j > i and abs(np.log(t[j] / target)) <= np.log1p(rtol):
            pairs.append((i, j))
    return pairs
