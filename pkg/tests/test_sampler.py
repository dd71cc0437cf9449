import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dlgp.errors import DomainError
from dlgp.sampler import SliceConfig, sample_chain, slice_sample_1d, slice_sample_hypercube


def std_normal(x):
    return -0.5 * float(np.sum(np.asarray(x) ** 2))


def test_config_validation():
    with pytest.raises(DomainError):
        SliceConfig(0.0)
    with pytest.raises(DomainError):
        SliceConfig(1.0, max_stepouts=0)


def test_start_outside_support_raises():
    rng = np.random.default_rng(0)
    with pytest.raises(DomainError):
        slice_sample_1d(lambda x: -np.inf, 0.0, SliceConfig(), rng)


def test_reproducible_for_fixed_seed():
    a = sample_chain(slice_sample_1d, std_normal, 0.0, 50, SliceConfig(), np.random.default_rng(3))
    b = sample_chain(slice_sample_1d, std_normal, 0.0, 50, SliceConfig(), np.random.default_rng(3))
    assert np.array_equal(a, b)


def test_uniform_target_stays_in_support():
    def logp(x):
        return 0.0 if 0 <= x <= 1 else -np.inf
    xs = sample_chain(slice_sample_1d, logp, 0.5, 2000, SliceConfig(0.3), np.random.default_rng(1))
    assert np.all((xs >= 0) & (xs <= 1))
    assert abs(xs.mean() - 0.5) < 0.05


@given(seed=st.integers(0, 2**31 - 1), x0=st.floats(-3, 3), width=st.floats(0.05, 5))
def test_draw_lies_in_slice_property(seed, x0, width):
    rng = np.random.default_rng(seed)
    d = slice_sample_1d(std_normal, x0, SliceConfig(width), rng)
    assert d.logp > d.log_u
    assert d.log_u <= std_normal(x0)
    assert d.logp == pytest.approx(std_normal(d.x))


@given(seed=st.integers(0, 2**31 - 1), dim=st.integers(1, 4))
def test_hypercube_draw_lies_in_slice_property(seed, dim):
    rng = np.random.default_rng(seed)
    x0 = rng.normal(size=dim)
    d = slice_sample_hypercube(std_normal, x0, SliceConfig(1.5), rng)
    assert d.logp > d.log_u
    # the hypercube has side w and contains x0
    assert np.all(np.abs(d.x - x0) < 1.5)


def test_hypercube_per_dimension_width():
    rng = np.random.default_rng(2)
    x0 = np.zeros(2)
    for _ in range(100):
        d = slice_sample_hypercube(std_normal, x0, SliceConfig((0.1, 4.0)), rng)
        assert abs(d.x[0]) < 0.1 and abs(d.x[1]) < 4.0


def test_hypercube_correlated_normal_moments():
    rho = 0.95
    P = np.linalg.inv(np.array([[1, rho], [rho, 1]]))

    def logp(x):
        return -0.5 * x @ P @ x

    xs = sample_chain(slice_sample_hypercube, logp, np.zeros(2), 20000, SliceConfig(2.0),
                      np.random.default_rng(5))[2000:]
    assert np.allclose(xs.mean(axis=0), 0, atol=0.15)
    assert np.corrcoef(xs.T)[0, 1] == pytest.approx(rho, abs=0.03)


def test_1d_gamma_moments():
    # Gamma(3, 1): mean 3, variance 3
    def logp(x):
        return 2 * math.log(x) - x if x > 0 else -np.inf

    xs = sample_chain(slice_sample_1d, logp, 1.0, 20000, SliceConfig(2.0), np.random.default_rng(4))[1000:]
    assert xs.mean() == pytest.approx(3.0, abs=0.1)
    assert xs.var() == pytest.approx(3.0, abs=0.3)


def test_1d_standard_normal_moments():
    xs = sample_chain(slice_sample_1d, std_normal, 0.0, 20000, SliceConfig(), np.random.default_rng(11))
    assert abs(xs.mean()) <= 0.05
    assert 0.9 <= xs.var() <= 1.1


def test_hypercube_independent_normal_moments():
    xs = sample_chain(slice_sample_hypercube, std_normal, np.zeros(2), 20000, SliceConfig(2.0),
                      np.random.default_rng(12))
    assert np.all(np.abs(xs.mean(axis=0)) <= 0.05)
    assert np.all((xs.var(axis=0) >= 0.9) & (xs.var(axis=0) <= 1.1))


def test_hypercube_one_dimension_agrees_with_1d():
    a = sample_chain(slice_sample_hypercube, std_normal, np.zeros(1), 20000, SliceConfig(2.0),
                     np.random.default_rng(13))[:, 0]
    b = sample_chain(slice_sample_1d, std_normal, 0.0, 20000, SliceConfig(2.0), np.random.default_rng(14))
    assert abs(a.mean() - b.mean()) < 0.08
    assert abs(a.var() - b.var()) < 0.1
