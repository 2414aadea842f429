"""Pointwise hot loops, JIT-compiled with numba when available.

Everything here is plain elementwise arithmetic on complex grids; the FFT /
BLAS work lives elsewhere.  Set the environment variable ``MSQ2_NO_NUMBA=1``
to force the pure-numpy fallbacks (used by the benchmark and by CI to check
that both paths agree bitwise-closely).
"""

from __future__ import annotations

import os

import numpy as np

USE_NUMBA = os.environ.get("MSQ2_NO_NUMBA", "0") not in ("1", "true", "yes")

if USE_NUMBA:
    try:
        import numba

        # the default TBB layer is version-sensitive; workqueue always works
        numba.config.THREADING_LAYER = "workqueue"
    except ImportError:  # pragma: no cover - numba is a declared dependency
        USE_NUMBA = False


# ---------------------------------------------------------------------------
# numpy reference implementations
# ---------------------------------------------------------------------------

def _nl_substep_numpy(u, tau, re_lam, im_lam):
    """Exact pointwise flow of du/dt = i*lam*|u|*u over time tau.

    With rho = |u| and x = im_lam*rho*tau:  rho(tau) = rho0/(1+x) and the
    phase advances by re_lam*rho*tau * log1p(x)/x (the ratio tends to 1 as
    im_lam -> 0, which also keeps tiny im_lam values stable).  Zeros stay
    zeros.
    """
    rho = np.abs(u)
    if im_lam > 0.0:
        x = im_lam * rho * tau
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = np.where(x > 0.0, np.log1p(x) / np.where(x > 0, x, 1.0), 1.0)
        theta = re_lam * rho * tau * ratio
        return u * np.exp(1j * theta) / (1.0 + x)
    return u * np.exp(1j * (re_lam * tau) * rho)


def _phase_twist_numpy(v, w1, w2, t):
    """v * exp(-i*t*(w1(y1)+w2(y2))) with w1, w2 per-axis arrays."""
    ph = w1[:, None] + w2[None, :]
    return v * np.exp(-1j * t * ph)


def _u_plus_phase_numpy(coord, freq):
    """Matrix exp(i * coord_p * freq_q) for the profile quadrature."""
    return np.exp(1j * coord[:, None] * freq[None, :])


if USE_NUMBA:
    from numba import njit, prange

    @njit(cache=True, parallel=True)
    def _nl_substep_numba(u, tau, re_lam, im_lam):  # pragma: no cover - jit
        out = np.empty_like(u)
        flat_u = u.ravel()
        flat_o = out.ravel()
        n = flat_u.size
        if im_lam > 0.0:
            for i in prange(n):
                z = flat_u[i]
                rho = abs(z)
                x = im_lam * rho * tau
                ratio = np.log1p(x) / x if x > 0.0 else 1.0
                theta = re_lam * rho * tau * ratio
                flat_o[i] = z * np.exp(complex(0.0, theta)) / (1.0 + x)
        else:
            for i in prange(n):
                z = flat_u[i]
                rho = abs(z)
                flat_o[i] = z * np.exp(complex(0.0, re_lam * tau * rho))
        return out

    @njit(cache=True, parallel=True)
    def _phase_twist_numba(v, w1, w2, t):  # pragma: no cover - jit
        n1, n2 = v.shape
        out = np.empty_like(v)
        for i in prange(n1):
            for j in range(n2):
                out[i, j] = v[i, j] * np.exp(complex(0.0, -t * (w1[i] + w2[j])))
        return out

    @njit(cache=True, parallel=True)
    def _u_plus_phase_numba(coord, freq):  # pragma: no cover - jit
        np_, nq = coord.size, freq.size
        out = np.empty((np_, nq), dtype=np.complex128)
        for p in prange(np_):
            for q in range(nq):
                out[p, q] = np.exp(complex(0.0, coord[p] * freq[q]))
        return out

    def nl_substep(u, tau, lam):
        return _nl_substep_numba(u, float(tau), float(lam.real), float(lam.imag))

    def phase_twist(v, w1, w2, t):
        return _phase_twist_numba(v, np.ascontiguousarray(w1),
                                  np.ascontiguousarray(w2), float(t))

    def u_plus_phase(coord, freq):
        return _u_plus_phase_numba(np.ascontiguousarray(coord),
                                   np.ascontiguousarray(freq))

else:

    def nl_substep(u, tau, lam):
        return _nl_substep_numpy(u, float(tau), float(lam.real), float(lam.imag))

    def phase_twist(v, w1, w2, t):
        return _phase_twist_numpy(v, w1, w2, float(t))

    def u_plus_phase(coord, freq):
        return _u_plus_phase_numpy(coord, freq)


# numpy versions are exported under stable names so tests and the benchmark
# can compare the two paths regardless of the flag.
nl_substep_numpy = (
    lambda u, tau, lam: _nl_substep_numpy(u, float(tau), float(lam.real), float(lam.imag))
)
phase_twist_numpy = _phase_twist_numpy
u_plus_phase_numpy = _u_plus_phase_numpy
