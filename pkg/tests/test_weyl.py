import warnings

import numpy as np
import pytest

from msq2.dispersion import quadratic, quadrel, stationary_phase_root
from msq2.errors import DegenerateFit, GridMismatch
from msq2.grid import ComplexField, Grid2D, Spectral2D
from msq2.weyl import (AliasWarning, CutoffProfile, PhaseSpaceSymbol,
                       build_weyl_1d, moyal_leading, moyal_remainder_scaling,
                       operator_norm_scaling, project_frame, projector_ops,
                       uniform_axis, weyl_apply_separable)

Y512 = uniform_axis(512, 10.0)


def _one(x, xi):
    return np.broadcast_to(np.float64(1.0),
                           np.broadcast_shapes(np.shape(x), np.shape(xi))).copy()


def _zero(x, xi):
    return np.zeros(np.broadcast_shapes(np.shape(x), np.shape(xi)))


def packet(y, center=0.0, k0=3.0, width=1.0):
    return np.exp(-((y - center) / width) ** 2) * np.exp(1j * k0 * y)


class TestKernelBasics:
    def test_unit_symbol_is_identity(self):
        op = build_weyl_1d(_one, Y512, 0.1)
        v = packet(Y512)
        assert np.max(np.abs(op.apply(v) - v)) <= 1e-12

    def test_frequency_symbol_is_scaled_derivative(self):
        h = 0.05
        op = build_weyl_1d(lambda s, xi: np.broadcast_to(
            xi, np.broadcast_shapes(np.shape(s), np.shape(xi))).copy(), Y512, h)
        v = packet(Y512)
        eta = 2 * np.pi * np.fft.fftfreq(512, d=Y512[1] - Y512[0])
        dv = np.fft.ifft(1j * eta * np.fft.fft(v))
        assert np.max(np.abs(op.apply(v) - (h / 1j) * dv)) \
            <= 1e-12 * np.max(np.abs(h * dv))

    def test_position_symbol_is_multiplication(self):
        op = build_weyl_1d(lambda s, xi: np.broadcast_to(
            np.tanh(s), np.broadcast_shapes(np.shape(s), np.shape(xi))).copy(),
            Y512, 0.1)
        v = packet(Y512)
        assert np.max(np.abs(op.apply(v) - np.tanh(Y512) * v)) <= 1e-12

    def test_quantization_linear_in_symbol(self, rng):
        f = rng.standard_normal(8)
        a = lambda s, xi: np.exp(-s ** 2) * np.cos(xi) + f[0]
        b = lambda s, xi: np.sin(s) / (1 + xi ** 2)
        c = 1.7 - 0.3j
        ka = build_weyl_1d(a, Y512, 0.1).kernel
        kb = build_weyl_1d(b, Y512, 0.1).kernel
        kab = build_weyl_1d(lambda s, xi: a(s, xi) + c * b(s, xi), Y512, 0.1).kernel
        assert np.max(np.abs(kab - (ka + c * kb))) <= 1e-12 * np.max(np.abs(kab))

    def test_self_adjoint_for_real_symbols(self):
        q = quadratic()
        cut = CutoffProfile()
        for h in (1.0, 0.1, 0.01):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", AliasWarning)
                op = build_weyl_1d(
                    lambda s, xi: cut.gamma((s + q.d1(xi)) / np.sqrt(h)), Y512, h)
            assert op.hermiticity_defect() <= 1e-12

    def test_alias_warning_fires(self):
        # symbol constant in x, peaked at the Nyquist frequency slot
        h = 0.05
        nyq_xi = h * np.pi / (Y512[1] - Y512[0])
        with pytest.warns(AliasWarning):
            build_weyl_1d(
                lambda s, xi: np.exp(-10.0 * (np.abs(xi) - nyq_xi) ** 2) * _one(s, xi),
                Y512, h)


class TestFirstOrderIdentity:
    @pytest.mark.parametrize("branch", [quadratic(), quadrel()],
                             ids=["quadratic", "quadrel"])
    @pytest.mark.parametrize("h", [1.0, 0.1, 0.01])
    def test_identity(self, branch, h):
        y = Y512
        v = packet(y, center=1.0)
        eta = 2 * np.pi * np.fft.fftfreq(y.size, d=y[1] - y[0])
        dv = np.fft.ifft(1j * eta * np.fft.fft(v))
        freq = stationary_phase_root(branch, y)
        op = build_weyl_1d(
            lambda s, xi: xi - np.asarray(stationary_phase_root(branch, s)), y, h)
        lhs = 1j * (1.0 / h) * op.apply(v)
        rhs = dv - 1j * (1.0 / h) * freq * v
        assert np.linalg.norm(lhs - rhs) <= 1e-8 * np.linalg.norm(rhs)


class TestSeparableApply:
    def test_identity_and_order(self, rng):
        y = uniform_axis(64, 4.0)
        op1 = build_weyl_1d(_one, y, 0.2)
        op2 = build_weyl_1d(_one, y, 0.2)
        data = rng.standard_normal((64, 64)) + 1j * rng.standard_normal((64, 64))
        out = weyl_apply_separable(op1, op2, data)
        assert np.max(np.abs(out - data)) <= 1e-12
        q = quadratic()
        cut = CutoffProfile()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", AliasWarning)
            g1 = build_weyl_1d(lambda s, xi: cut.gamma((s + q.d1(xi)) / 0.3), y, 0.09)
            g2 = build_weyl_1d(lambda s, xi: cut.gamma((s + q.d1(xi)) / 0.3), y, 0.09)
        a = g2.apply_along(g1.apply_along(data, 0), 1)
        b = g1.apply_along(g2.apply_along(data, 1), 0)
        assert np.max(np.abs(a - b)) <= 1e-12 * np.max(np.abs(a))

    def test_grid_mismatch(self, rng):
        op = build_weyl_1d(_one, uniform_axis(64, 4.0), 0.2)
        with pytest.raises(GridMismatch):
            op.apply_along(np.zeros((32, 32), complex), 0)


def ray_state_frame(ops, t, freq_offset=0.0):
    """WKB state exp(i t w(y)) g(y): microlocalized on the stationary set
    (local frequency t*freq(y) exactly), the object the near-set cutoff is
    built to keep.  freq_offset shifts its frequency off the set by a fixed
    amount in the symbol variable.

    Pointwise Gaussian packets cannot serve here: a minimum-uncertainty
    state occupies phase-space area ~h and only marginally fits inside the
    O(sqrt(h)) strip, so its far fraction stays O(1) at every h.
    """
    g = ops.grid
    x1 = g.axis(0)[:, None] / t
    x2 = g.axis(1)[None, :] / t
    env = np.exp(-((x1 ** 2 + x2 ** 2)))
    # quadratic branches: w(y) = -|y|^2/4 per axis
    phase = -t * (x1 ** 2 + x2 ** 2) / 4.0
    if freq_offset:
        phase = phase + t * freq_offset * (x1 + x2)
    return ComplexField(g, env * np.exp(1j * phase) / t, t)


class TestProjector:
    def test_ray_state_concentration(self, quadratic_sym):
        t = 100.0
        g = Grid2D(512, 512, 4.0 * t, 4.0 * t)
        ops = Spectral2D(g, quadratic_sym)
        frame = project_frame(ops, ray_state_frame(ops, t), CutoffProfile())
        ratio = (np.sqrt(np.sum(np.abs(frame.v_far) ** 2))
                 / np.sqrt(np.sum(np.abs(frame.v) ** 2)))
        assert ratio <= 0.05

    def test_far_state_rejected(self, quadratic_sym):
        # frequency offset 0.6 >= 2 r2 sqrt(h) = 0.4 off the stationary set
        t = 100.0
        g = Grid2D(512, 512, 4.0 * t, 4.0 * t)
        ops = Spectral2D(g, quadratic_sym)
        frame = project_frame(ops, ray_state_frame(ops, t, freq_offset=0.6),
                              CutoffProfile())
        ratio = (np.sqrt(np.sum(np.abs(frame.v_near) ** 2))
                 / np.sqrt(np.sum(np.abs(frame.v) ** 2)))
        assert ratio <= 0.05

    def test_split_is_exact_and_approx_idempotent(self, quadratic_sym):
        t = 100.0
        g = Grid2D(512, 512, 4.0 * t, 4.0 * t)
        ops = Spectral2D(g, quadratic_sym)
        cut = CutoffProfile()
        frame = project_frame(ops, ray_state_frame(ops, t), cut)
        recon = frame.v_near + frame.v_far
        assert np.max(np.abs(recon - frame.v)) <= 1e-15 * np.max(np.abs(frame.v))
        op1, op2 = projector_ops(ops, t, cut)
        twice = weyl_apply_separable(op1, op2, frame.v_near)
        num = np.sqrt(np.sum(np.abs(twice - frame.v_near) ** 2))
        den = np.sqrt(np.sum(np.abs(frame.v_near) ** 2))
        assert num / den <= 0.1


class TestMoyal:
    def test_canonical_pair(self):
        a = PhaseSpaceSymbol(val=lambda x, xi: x * np.ones_like(xi + 0.0 * x),
                             dx=_one, dxi=_zero)
        b = PhaseSpaceSymbol(val=lambda x, xi: xi * np.ones_like(x + 0.0 * xi),
                             dx=_zero, dxi=_one)
        h = 0.3
        x = np.linspace(-2, 2, 7)[:, None]
        xi = np.linspace(-1, 1, 5)[None, :]
        lead_ab = moyal_leading(a, b, h)(x, xi)
        lead_ba = moyal_leading(b, a, h)(x, xi)
        assert np.allclose(lead_ab, x * xi + 0.5j * h)
        assert np.allclose(lead_ba, x * xi - 0.5j * h)
        assert np.allclose(lead_ab - lead_ba, 1j * h)

    def test_equal_symbols_square(self):
        a = PhaseSpaceSymbol(val=lambda x, xi: np.exp(-x ** 2) * np.cos(xi),
                             dx=lambda x, xi: -2 * x * np.exp(-x ** 2) * np.cos(xi),
                             dxi=lambda x, xi: -np.exp(-x ** 2) * np.sin(xi))
        x = np.linspace(-2, 2, 9)[:, None]
        xi = np.linspace(-1, 1, 9)[None, :]
        assert np.allclose(moyal_leading(a, a, 0.2)(x, xi), a.val(x, xi) ** 2)

    def test_antisymmetry_is_poisson_bracket(self, rng):
        a = PhaseSpaceSymbol(val=lambda x, xi: np.sin(x) * np.exp(-xi ** 2),
                             dx=lambda x, xi: np.cos(x) * np.exp(-xi ** 2),
                             dxi=lambda x, xi: -2 * xi * np.sin(x) * np.exp(-xi ** 2))
        b = PhaseSpaceSymbol(val=lambda x, xi: np.cos(x * xi),
                             dx=lambda x, xi: -xi * np.sin(x * xi),
                             dxi=lambda x, xi: -x * np.sin(x * xi))
        h = 0.17
        x = rng.uniform(-2, 2, (6, 1))
        xi = rng.uniform(-2, 2, (1, 6))
        lhs = moyal_leading(a, b, h)(x, xi) - moyal_leading(b, a, h)(x, xi)
        poisson = a.dx(x, xi) * b.dxi(x, xi) - a.dxi(x, xi) * b.dx(x, xi)
        assert np.allclose(lhs, 1j * h * poisson, atol=1e-14)

    def test_bilinear_remainder_at_floor(self):
        a = PhaseSpaceSymbol(val=lambda x, xi: x * np.ones_like(xi + 0.0 * x),
                             dx=_one, dxi=_zero, name="coord")
        b = PhaseSpaceSymbol(val=lambda x, xi: xi * np.ones_like(x + 0.0 * xi),
                             dx=_zero, dxi=_one, name="freq")
        y = uniform_axis(256, 6.0)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", AliasWarning)
            with pytest.raises(DegenerateFit):
                moyal_remainder_scaling(a, b, (0.1, 0.01, 0.003), y, floor=1e-9)

    def test_smooth_pair_is_second_order(self):
        qr = quadrel()
        a = PhaseSpaceSymbol(
            val=lambda x, xi: np.exp(-x ** 2) * np.cos(xi),
            dx=lambda x, xi: -2 * x * np.exp(-x ** 2) * np.cos(xi),
            dxi=lambda x, xi: -np.exp(-x ** 2) * np.sin(xi), name="gc")
        b = PhaseSpaceSymbol(
            val=lambda x, xi: x + qr.d1(xi), dx=_one,
            dxi=lambda x, xi: np.broadcast_to(
                qr.d2(xi), np.broadcast_shapes(np.shape(x), np.shape(xi))).copy(),
            name="vf")
        y = uniform_axis(256, 6.0)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", AliasWarning)
            res = moyal_remainder_scaling(a, b, (1e-1, 3e-2, 1e-2, 3e-3), y)
        assert res.fit.slope >= 1.8


class TestNormScaling:
    def test_unit_symbol_norm_one(self):
        y = uniform_axis(128, 6.0)
        sc = operator_norm_scaling(lambda h: _one, (1.0, 0.1, 0.01), y, "l2_l2")
        assert np.allclose(sc.norms, 1.0, rtol=1e-8)

    def test_projector_family_bands(self):
        cut = CutoffProfile()
        q = quadratic()
        y = uniform_axis(256, 8.0)
        fam = lambda h: (lambda s, xi, hh=h: cut.gamma((s + q.d1(xi)) / np.sqrt(hh)))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", AliasWarning)
            s22 = operator_norm_scaling(fam, (1.0, 0.1, 0.01), y, "l2_l2_2d")
            sinf = operator_norm_scaling(fam, (1.0, 0.1, 0.01), y, "l2_linf_2d")
        assert -0.1 <= s22.fit.slope <= 0.1
        assert s22.constant_spread <= 2.0
        assert -0.6 <= sinf.fit.slope <= -0.4
