import numpy as np
import pytest
from hypothesis import given, strategies as st

from msq2.errors import BoundaryLeak, ConfigError, NonFinite
from msq2.evolution import (RunConfig, evolve, log_checkpoints,
                            mass_dissipation_check, nonlinear_substep,
                            self_convergence_ratio, strang_step)
from msq2.grid import ComplexField, Grid2D, Spectral2D, gaussian_datum, l2_norm


def const_field(grid, value):
    return ComplexField(grid, np.full((grid.n1, grid.n2), value, complex), 1.0)


class TestNonlinearSubstep:
    def test_real_lambda_rotates_phase(self, small_ops):
        f = const_field(small_ops.grid, 2.0)
        out = nonlinear_substep(f, 0.5, 1.0 + 0j)
        assert abs(out.data[0, 0]) == pytest.approx(2.0, rel=1e-15)
        assert np.angle(out.data[0, 0]) == pytest.approx(1.0, rel=1e-15)

    def test_dissipative_modulus(self, small_ops):
        f = const_field(small_ops.grid, 1.0)
        out = nonlinear_substep(f, 1.0, 1j)
        assert out.data[0, 0] == pytest.approx(0.5 + 0j, abs=1e-15)

    def test_mixed_lambda(self, small_ops):
        f = const_field(small_ops.grid, 1.0)
        out = nonlinear_substep(f, 1.0, 1.0 + 1j)
        assert abs(out.data[0, 0]) == pytest.approx(0.5, rel=1e-14)
        assert np.angle(out.data[0, 0]) == pytest.approx(np.log(2.0), rel=1e-14)

    def test_zeros_stay_zero(self, small_ops, rng):
        g = small_ops.grid
        data = rng.standard_normal((g.n1, g.n2)) + 0j
        data[::2, :] = 0.0
        out = nonlinear_substep(ComplexField(g, data, 1.0), 0.7, 2.0 + 1j)
        assert np.all(out.data[::2, :] == 0.0)

    @given(tau=st.floats(0.0, 3.0), im=st.floats(0.0, 2.0), re=st.floats(-2.0, 2.0))
    def test_modulus_never_grows(self, small_ops, tau, im, re):
        f = const_field(small_ops.grid, 1.3)
        out = nonlinear_substep(f, tau, complex(re, im))
        assert np.all(np.abs(out.data) <= 1.3 + 1e-12)
        if im == 0.0:
            assert np.allclose(np.abs(out.data), 1.3, rtol=1e-14)

    def test_rejects_bad_args(self, small_ops):
        f = const_field(small_ops.grid, 1.0)
        with pytest.raises(ConfigError):
            nonlinear_substep(f, -0.1, 1j)
        with pytest.raises(ConfigError):
            nonlinear_substep(f, 0.1, -1j)


class TestStrangStep:
    def test_lambda_zero_is_free_flow(self, small_ops, rng):
        g = small_ops.grid
        f = small_ops.dealias(gaussian_datum(g, 2.0))
        a = strang_step(small_ops, f, 0.2, 0j)
        b = small_ops.free_propagate(f, 0.2)
        assert l2_norm(ComplexField(g, a.data - b.data, a.t)) <= 1e-13 * l2_norm(b)

    def test_conservative_isometry(self, small_ops):
        f = small_ops.dealias(gaussian_datum(small_ops.grid, 2.0))
        out = strang_step(small_ops, f, 0.1, 1.0 + 0j)
        assert abs(l2_norm(out) - l2_norm(f)) <= 1e-12 * l2_norm(f)

    def test_self_convergence_second_order(self, quadratic_sym):
        g = Grid2D(128, 128, 16.0, 16.0)
        ops = Spectral2D(g, quadratic_sym)
        u0 = ops.dealias(ComplexField(g, 0.4 * gaussian_datum(g, 2.0).data, 1.0))
        ratio = self_convergence_ratio(ops, u0, 1.0 + 0j, t_end=2.0, n_coarse=32)
        assert 3.0 <= ratio <= 5.0


class TestEvolve:
    def test_checkpoints_hit_exactly(self, small_ops):
        u0 = ComplexField(small_ops.grid, 0.05 * gaussian_datum(small_ops.grid, 2.0).data, 1.0)
        cfg = RunConfig(lam=1j, eps=0.5, t_max=4.0, leak_tol=1e-3)
        _, traj = evolve(small_ops, u0, cfg)
        cps = cfg.checkpoint_times()
        assert traj.times == pytest.approx(list(cps), abs=0)
        assert traj.times[0] == 1.0

    def test_monotone_dissipative_decay(self, small_ops):
        u0 = ComplexField(small_ops.grid, 0.5 * gaussian_datum(small_ops.grid, 2.0).data, 1.0)
        cfg = RunConfig(lam=1j, eps=0.5, t_max=5.0, leak_tol=5e-2)
        _, traj = evolve(small_ops, u0, cfg)
        l2 = traj.series("l2")
        assert np.all(np.diff(l2) < 0)
        rep = mass_dissipation_check(traj, 1j)
        assert rep.max_interior_mismatch <= 0.05

    def test_zero_datum_stays_zero(self, small_ops):
        g = small_ops.grid
        u0 = ComplexField(g, np.zeros((g.n1, g.n2), complex), 1.0)
        _, traj = evolve(small_ops, u0, RunConfig(lam=1.0 + 0j, eps=0.5, t_max=3.0))
        assert np.all(traj.series("l2") == 0.0)

    def test_nonfinite_aborts(self, small_ops):
        g = small_ops.grid
        data = np.zeros((g.n1, g.n2), complex)
        data[0, 0] = np.nan
        with pytest.raises(NonFinite):
            evolve(small_ops, ComplexField(g, data, 1.0),
                   RunConfig(lam=0j, eps=0.5, t_max=2.0))

    def test_boundary_leak_aborts(self, quadratic_sym):
        g = Grid2D(64, 64, 6.0, 6.0)   # box far too small for t_max
        ops = Spectral2D(g, quadratic_sym)
        u0 = ops.dealias(gaussian_datum(g, 1.0))
        with pytest.raises(BoundaryLeak):
            evolve(ops, u0, RunConfig(lam=0j, eps=0.5, t_max=10.0,
                                      leak_tol=1e-8, dealias=False))

    def test_time_reversal_linear(self, quadratic_sym):
        g = Grid2D(256, 256, 48.0, 48.0)
        ops = Spectral2D(g, quadratic_sym)
        u0 = gaussian_datum(g, 1.0)
        cfg = RunConfig(lam=0j, eps=1.0, t_max=5.0, leak_tol=1e-3, dealias=False)
        uf, _ = evolve(ops, u0, cfg)
        back = ops.free_propagate(uf, -(uf.t - 1.0))
        assert l2_norm(ComplexField(g, back.data - u0.data, 1.0)) \
            <= 1e-10 * l2_norm(u0)

    def test_conservative_drift_bound(self, quadratic_sym):
        g = Grid2D(256, 256, 48.0, 48.0)
        ops = Spectral2D(g, quadratic_sym)
        u0 = ops.dealias(ComplexField(g, 0.2 * gaussian_datum(g, 2.0).data, 1.0))
        cfg = RunConfig(lam=1.0 + 0j, eps=0.5, t_max=8.0, leak_tol=1e-3)
        _, traj = evolve(ops, u0, cfg)
        assert mass_dissipation_check(traj, 1.0 + 0j).l2_drift <= 1e-9


class TestSchedule:
    def test_log_checkpoints(self):
        cps = log_checkpoints(100.0, per_decade=8)
        assert cps[0] == 1.0 and cps[-1] == 100.0
        assert np.all(np.diff(cps) > 0)

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            RunConfig(lam=-1j, eps=0.5, t_max=10.0)
        with pytest.raises(ConfigError):
            RunConfig(lam=0j, eps=0.0, t_max=10.0)
        with pytest.raises(ConfigError):
            RunConfig(lam=0j, eps=0.5, t_max=0.5)
