import numpy as np
import pytest

from msq2 import _kernels


@pytest.fixture()
def field(rng):
    return rng.standard_normal((96, 96)) + 1j * rng.standard_normal((96, 96))


@pytest.mark.parametrize("lam", [0.5 + 0j, 1j, 1.3 + 0.8j])
def test_nl_substep_paths_agree(field, lam):
    a = _kernels.nl_substep(field, 0.37, lam)
    b = _kernels.nl_substep_numpy(field, 0.37, lam)
    assert np.max(np.abs(a - b)) <= 1e-14


def test_nl_substep_zero_stays_zero():
    u = np.zeros((8, 8), complex)
    assert np.all(_kernels.nl_substep(u, 1.0, 1 + 1j) == 0.0)


def test_phase_twist_paths_agree(field, rng):
    w1 = rng.standard_normal(96)
    w2 = rng.standard_normal(96)
    a = _kernels.phase_twist(field, w1, w2, 11.0)
    b = _kernels.phase_twist_numpy(field, w1, w2, 11.0)
    assert np.max(np.abs(a - b)) <= 1e-13


def test_u_plus_phase_paths_agree(rng):
    coord = rng.uniform(-30, 30, 40)
    freq = rng.uniform(-3, 3, 50)
    a = _kernels.u_plus_phase(coord, freq)
    b = _kernels.u_plus_phase_numpy(coord, freq)
    assert np.max(np.abs(a - b)) <= 1e-13
    assert np.allclose(np.abs(a), 1.0)


def test_benchmark_smoke(capsys):
    from msq2.benchmarks import run_benchmark
    res = run_benchmark(n=128)
    for row in res.values():
        assert row["max_dev"] <= 1e-12
