"""Acceptance gate: every criterion at its stated tolerance.

One test per criterion, printing a measured-vs-threshold line.  Reference
runs are cached under MSQ2_ACCEPT_CACHE (or a session tmp dir), so a full
pass costs one round of simulations and re-runs are cheap.  Set
MSQ2_ACCEPT_QUICK=1 to shrink the two large reference runs.
"""

import os

import pytest

from msq2.acceptance import (AcceptanceContext, c01_gaussian_oracle,
                             c02_linear_decay, c03_nonlinear_decay,
                             c04_mass_law, c05_splitting_order,
                             c06_weyl_identity, c07_norm_scalings,
                             c08_moyal_remainder, c09_far_component_decay,
                             c10_z_convergence, c11_model_residual,
                             c12_dissipative_limit, c13_log_phase_identity,
                             format_verify_table)

_RESULTS = []


@pytest.fixture(scope="session")
def ctx(tmp_path_factory):
    cache = os.environ.get("MSQ2_ACCEPT_CACHE")
    work = cache if cache else tmp_path_factory.mktemp("acceptance")
    return AcceptanceContext(work)


def _check(res):
    _RESULTS.append(res)
    print(f"\n{res.cid} {res.name}: "
          f"{'PASS' if res.passed else 'FAIL'}  measured {res.measured}  "
          f"threshold [{res.threshold}]")
    assert res.passed, f"{res.cid} {res.name}: {res.measured} vs {res.threshold}"


def test_c01_gaussian_oracle(ctx):
    _check(c01_gaussian_oracle(ctx))


def test_c02_linear_dispersive_decay(ctx):
    _check(c02_linear_decay(ctx))


def test_c03_nonlinear_decay(ctx):
    _check(c03_nonlinear_decay(ctx))


def test_c04_mass_law(ctx):
    _check(c04_mass_law(ctx))


def test_c05_splitting_order(ctx):
    _check(c05_splitting_order(ctx))


def test_c06_weyl_identity(ctx):
    _check(c06_weyl_identity(ctx))


def test_c07_projector_norm_scalings(ctx):
    _check(c07_norm_scalings(ctx))


def test_c08_moyal_remainder(ctx):
    _check(c08_moyal_remainder(ctx))


def test_c09_far_component_decay(ctx):
    _check(c09_far_component_decay(ctx))


def test_c10_z_convergence(ctx):
    _check(c10_z_convergence(ctx))


def test_c11_model_residual(ctx):
    _check(c11_model_residual(ctx))


def test_c12_dissipative_limit(ctx):
    _check(c12_dissipative_limit(ctx))


def test_c13_log_phase_identity(ctx):
    _check(c13_log_phase_identity(ctx))


def test_free_wave_scattering_trend(ctx):
    """Phase-corrected free-wave comparison improves over the last decade."""
    row = ctx.rate("big-conservative", "free_wave_resid_trend")
    print(f"\nfree-wave residual ratio (end/start): {float(row['value']):.3f}")
    assert row["passed"] == "pass"


def test_zzz_write_table(ctx, capsys):
    if _RESULTS:
        with capsys.disabled():
            print("\n" + format_verify_table(_RESULTS))
