import numpy as np
import pytest
from scipy.stats import kstest

from entlab import state
from entlab.errors import ZeroNormError


def test_normalize_examples():
    assert np.allclose(state.normalize([2, 0, 0, 0]), [1, 0, 0, 0])
    assert np.allclose(state.normalize([0.5, 0.5, 0.5, 0.5]), [0.5, 0.5, 0.5, 0.5])
    assert np.allclose(state.normalize([1, 1, 1, 1]), [0.5, 0.5, 0.5, 0.5])


def test_normalize_direction_and_tolerance():
    rng = np.random.default_rng(0)
    for _ in range(200):
        q = rng.standard_normal(4) * 10 ** rng.uniform(-3, 3)
        out = state.normalize(q)
        assert abs(np.dot(out, out) - 1.0) < state.NORM_TOL
        cos = np.dot(out, q) / np.linalg.norm(q)
        assert cos > 1 - 1e-12


def test_normalize_zero_norm_raises():
    with pytest.raises(ZeroNormError):
        state.normalize(np.zeros(4))


def test_concurrence_examples():
    assert state.concurrence([0.5, 0.5, 0.5, 0.5]) == 0.0
    bell = np.array([1, 0, 0, 1]) / np.sqrt(2)
    assert abs(state.concurrence(bell) - 1.0) < 1e-15
    assert state.concurrence([1, 0, 0, 0]) == 0.0


def test_concurrence_invariances():
    rng = np.random.default_rng(1)
    for _ in range(500):
        q = state.normalize(rng.standard_normal(4))
        c = state.concurrence(q)
        assert 0.0 <= c <= 1.0 + 1e-12
        assert state.concurrence(-q) == c
        assert abs(state.concurrence_sq(q) - c * c) < 1e-15


def test_ergodic_angle_roundtrip():
    rng = np.random.default_rng(2)
    for _ in range(200):
        q = state.normalize(rng.standard_normal(4))
        ang = state.angles_from_state(q)
        assert 0 <= ang.psi <= np.pi and 0 <= ang.theta <= np.pi
        assert 0 <= ang.phi < 2 * np.pi
        assert np.allclose(ang.to_state(), q, atol=1e-12)


def test_ergodic_mean_c2_constant():
    assert state.ergodic_mean_c2() == pytest.approx(1.0 / 3.0, abs=0)


def test_ergodic_sample_moments():
    rng = np.random.default_rng(3)
    qs = state.sample_ergodic(rng, size=1_000_000)
    c2 = 4.0 * (qs[:, 0] * qs[:, 3] - qs[:, 2] * qs[:, 1]) ** 2
    # uniform-measure average of C^2 is exactly 1/3
    assert abs(c2.mean() - 1.0 / 3.0) < 0.002
    # Monte Carlo estimate agrees with the constant within 3 sigma
    assert abs(c2.mean() - state.ergodic_mean_c2()) < 3 * c2.std() / 1000.0
    # symmetry: component means vanish, component second moments are 1/4
    se = 1.0 / np.sqrt(len(qs))
    for j in range(4):
        assert abs(qs[:, j].mean()) < 4 * se
        assert abs((qs[:, j] ** 2).mean() - 0.25) < 4 * se


def test_basis_states_have_zero_c2():
    vals = [state.concurrence_sq(np.eye(4)[j]) for j in range(4)]
    assert np.allclose(vals, 0.0)


def test_ergodic_psi_distribution_ks():
    rng = np.random.default_rng(4)
    qs = state.sample_ergodic(rng, size=100_000)
    psi = np.arccos(np.clip(qs[:, 0], -1, 1))
    cdf = lambda x: (2 * x - np.sin(2 * x)) / (2 * np.pi)
    stat = kstest(psi, cdf).statistic
    # 1% critical value of the one-sample KS statistic
    assert stat < 1.63 / np.sqrt(100_000)


def test_states_with_concurrence_hits_target():
    rng = np.random.default_rng(5)
    for c_target in (0.0, 0.3, 0.7, 1.0):
        qs = state.states_with_concurrence(c_target, 50, rng)
        for q in qs:
            assert abs(np.dot(q, q) - 1.0) < 1e-12
            assert abs(state.concurrence(q) - c_target) < 1e-10
