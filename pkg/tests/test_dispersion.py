import numpy as np
import pytest
from hypothesis import given, strategies as st

from msq2.dispersion import (DispersionSymbol1D, build_phase_table, make_symbol2d,
                             quadratic, quadrel, stationary_phase_root,
                             table_axis, validate_ellipticity)
from msq2.errors import (BracketFailure, ConfigError, DerivativeMismatch,
                         NonElliptic)

# frozen regression constants (bisection / Gaussian-moment oracles; see tests
# themselves for the defining equations)
QUADREL_ROOT_X3 = -1.1261298267776318
QUADREL_W33 = -1.208354282218144


class TestEllipticity:
    def test_quadratic_band(self):
        rep = validate_ellipticity(quadratic(), (-10, 10), 101)
        assert rep.d2_min == rep.d2_max == 2.0
        assert rep.passed

    def test_quadrel_band(self):
        rep = validate_ellipticity(quadrel(), (-10, 10), 101)
        assert rep.d2_min == pytest.approx(2.0 + (1.0 + 100.0) ** -1.5, rel=1e-12)
        assert rep.d2_max == pytest.approx(3.0, rel=1e-12)
        assert rep.passed

    def test_cubic_is_rejected(self):
        cubic = DispersionSymbol1D(
            eval=lambda x: np.asarray(x, float) ** 3, d1=lambda x: 3 * x ** 2,
            d2=lambda x: 6 * np.asarray(x, float), d3=lambda x: 6 * np.ones_like(np.asarray(x, float)),
            c_low=0.1, d_high=10.0, name="cubic")
        with pytest.raises(NonElliptic):
            validate_ellipticity(cubic, (-1, 1), 51)

    def test_wrong_derivative_detected(self):
        bad = DispersionSymbol1D(
            eval=lambda x: np.asarray(x, float) ** 2,
            d1=lambda x: 2.1 * np.asarray(x, float),  # inconsistent
            d2=lambda x: 2.0 * np.ones_like(np.asarray(x, float)),
            d3=lambda x: np.zeros_like(np.asarray(x, float)),
            c_low=2.0, d_high=2.0, name="bad")
        with pytest.raises(DerivativeMismatch):
            validate_ellipticity(bad, (-2, 2), 31)

    def test_out_of_pinch_fails_report(self):
        loose = DispersionSymbol1D(
            eval=lambda x: np.asarray(x, float) ** 2,
            d1=lambda x: 2.0 * np.asarray(x, float),
            d2=lambda x: 2.0 * np.ones_like(np.asarray(x, float)),
            d3=lambda x: np.zeros_like(np.asarray(x, float)),
            c_low=2.5, d_high=3.0, name="mislabeled")
        rep = validate_ellipticity(loose, (-1, 1), 11)
        assert not rep.passed


class TestStationaryRoot:
    def test_quadratic_exact(self):
        assert stationary_phase_root(quadratic(), 1.0) == pytest.approx(-0.5, abs=1e-15)
        assert stationary_phase_root(quadratic(), 0.0) == 0.0

    def test_quadrel_frozen_value(self):
        root = stationary_phase_root(quadrel(), 3.0)
        assert abs(root - QUADREL_ROOT_X3) <= 1e-12 * 4

    def test_bracket_failure(self):
        with pytest.raises(BracketFailure):
            stationary_phase_root(quadratic(), 1e9, xi_max=100.0)

    @given(st.floats(-20, 20), st.floats(0.5, 2.0))
    def test_quadratic_closed_form(self, x, a):
        root = stationary_phase_root(quadratic(a), x)
        assert root == pytest.approx(-x / (2 * a), abs=1e-13 * (1 + abs(x)))

    def test_residual_property_batch(self, rng):
        xs = rng.uniform(-20, 20, size=1000)
        for sym in (quadratic(), quadrel()):
            roots = stationary_phase_root(sym, xs)
            resid = np.abs(xs + np.asarray(sym.d1(roots)))
            assert np.all(resid <= 1e-10 * (1 + np.abs(xs)))


class TestPhaseTable:
    def test_quadratic_nodes_exact(self, quadratic_sym):
        ax = table_axis(20.0)
        tab = build_phase_table(quadratic_sym, (ax, ax))
        w = tab.phase(np.array([2.0]), np.array([-2.0]))
        assert w[0, 0] == pytest.approx(-2.0, abs=1e-14)
        assert tab.phase(np.array([0.0]), np.array([0.0]))[0, 0] == 0.0
        assert np.allclose(tab.phase_split[0], -ax ** 2 / 4.0, rtol=1e-14, atol=1e-14)
        assert np.allclose(tab.freq[0], -ax / 2.0, rtol=0, atol=1e-14)

    def test_quadrel_frozen_w(self):
        sym = make_symbol2d({"name": "quadrel"})
        ax = table_axis(5.0)
        tab = build_phase_table(sym, (ax, ax))
        w = tab.phase(np.array([3.0]), np.array([3.0]))
        assert w[0, 0] == pytest.approx(QUADREL_W33, abs=1e-11)

    def test_invariants(self):
        sym = make_symbol2d({"name": "quadrel"})
        ax = table_axis(20.0)
        tab = build_phase_table(sym, (ax, ax))
        for k, branch in enumerate(sym.branches):
            resid = np.abs(ax + np.asarray(branch.d1(tab.freq[k])))
            assert np.all(resid <= 1e-10 * (1 + np.abs(ax)))
            target = -1.0 / np.asarray(branch.d2(tab.freq[k]))
            assert np.allclose(tab.freq_deriv[k], target, rtol=1e-10)
            assert np.all(np.diff(tab.freq[k]) < 0)  # strictly decreasing

    def test_offnode_interpolation_budget(self, rng):
        sym = make_symbol2d({"name": "quadrel"})
        ax = table_axis(20.0)
        tab = build_phase_table(sym, (ax, ax))
        x = rng.uniform(-19.5, 19.5, size=200)
        direct = x * stationary_phase_root(sym.fx, x) + np.asarray(
            sym.fx.eval(stationary_phase_root(sym.fx, x)))
        assert np.max(np.abs(tab.phase_axis(0, x) - direct)) <= 1e-9

    def test_nonmonotone_axis_rejected(self, quadratic_sym):
        ax = np.array([0.0, 1.0, 1.0, 2.0])
        with pytest.raises(ConfigError):
            build_phase_table(quadratic_sym, (ax, ax))
