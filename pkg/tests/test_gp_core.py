import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import multivariate_normal

from dlgp.errors import DomainError, InputError, JitterWarning, NumericalError
from dlgp.gp_core import (KernelHyper, chol_psd, cross_gram, gp_posterior, gram, log_marginal,
                          se_kernel, se_kernel_input_grad)


def test_se_kernel_hand_values():
    assert se_kernel(1.0, 0.0, 1.0) == pytest.approx(math.exp(-0.5), abs=1e-15)
    assert se_kernel(2.0, 2.0, 0.3) == 1.0
    assert se_kernel(0.0, 1e3, 1.0) == 0.0


def test_se_kernel_rejects_bad_lengthscale():
    for bad in (0.0, -1.0):
        with pytest.raises(DomainError):
            se_kernel(0.0, 1.0, bad)
    with pytest.raises(DomainError):
        KernelHyper(0.0, 0.1)
    with pytest.raises(DomainError):
        KernelHyper(1.0, -0.1)


def test_input_grad_matches_finite_difference():
    h = 1e-6
    for x, x2, ls in [(0.3, -0.4, 0.7), (2.0, 1.0, 1.5), (-1.0, 0.5, 0.2)]:
        fd = (se_kernel(x + h, x2, ls) - se_kernel(x - h, x2, ls)) / (2 * h)
        assert se_kernel_input_grad(x, x2, ls) == pytest.approx(fd, rel=1e-6, abs=1e-12)


def test_gram_has_nugget_on_diagonal():
    K = gram([0.0, 1.0, 3.0], KernelHyper(1.0, 0.25))
    assert np.allclose(np.diag(K), 1.25)
    assert K[0, 1] == pytest.approx(math.exp(-0.5))
    assert np.array_equal(K, K.T)


def test_cross_gram_shape():
    assert cross_gram([0.0, 1.0], [0.0, 1.0, 2.0], 1.0).shape == (2, 3)


def test_gram_rejects_non_finite():
    with pytest.raises(InputError):
        gram([0.0, np.nan], KernelHyper())


def test_chol_hand_example():
    L, jitter = chol_psd(np.array([[4.0, 2.0], [2.0, 3.0]]))
    assert jitter == 0.0
    assert np.allclose(L, [[2.0, 0.0], [1.0, math.sqrt(2.0)]], atol=1e-15)


def test_chol_adds_jitter_to_singular_matrix():
    K = np.ones((3, 3))
    L, jitter = chol_psd(K)
    assert 0 < jitter <= 1e-4
    assert np.allclose(L @ L.T, K + jitter * np.eye(3))


def test_chol_warns_when_jitter_grows():
    K = np.ones((3, 3)) - 1e-7 * np.eye(3)
    with pytest.warns(JitterWarning):
        _, jitter = chol_psd(K)
    assert jitter == pytest.approx(1e-6)


def test_chol_names_pivot_on_failure():
    with pytest.raises(NumericalError, match="pivot 2"):
        chol_psd(np.array([[1.0, 0.0], [0.0, -1.0]]))


def test_chol_empty():
    L, jitter = chol_psd(np.zeros((0, 0)))
    assert L.shape == (0, 0) and jitter == 0.0


def test_log_marginal_hand_values():
    # N(0 | 0, 1) and N(2 | 0, 1)
    assert log_marginal([0.0], np.eye(1)) == pytest.approx(-0.91893853320467, abs=1e-12)
    assert log_marginal([2.0], np.eye(1)) == pytest.approx(-2.91893853320467, abs=1e-12)
    assert log_marginal([], np.zeros((0, 0))) == 0.0


def test_log_marginal_matches_scipy(rng):
    A = rng.normal(size=(5, 5))
    K = A @ A.T + 0.5 * np.eye(5)
    y = rng.normal(size=5)
    ref = multivariate_normal(np.zeros(5), K).logpdf(y)
    assert log_marginal(y, K) == pytest.approx(ref, abs=1e-10)


def test_log_marginal_shape_mismatch():
    with pytest.raises(InputError):
        log_marginal([1.0, 2.0], np.eye(3))


def test_posterior_interpolates_with_tiny_nugget():
    x = np.array([-1.0, 0.0, 1.5])
    y = np.array([0.3, -0.2, 1.0])
    post = gp_posterior(x, y, x, KernelHyper(1.0, 1e-10), include_noise=False)
    assert np.allclose(post.mean, y, atol=1e-6)
    assert np.all(post.var < 1e-6)


def test_posterior_without_data_is_prior():
    post = gp_posterior([], [], [0.0, 1.0], KernelHyper(1.0, 0.1), mean_fn=2.0)
    assert np.allclose(post.mean, 2.0)
    assert np.allclose(post.cov, [[1.1, math.exp(-0.5)], [math.exp(-0.5), 1.1]])


def test_posterior_single_point_oracle():
    # one observation y=1 at x=0, nugget 0.5, query at x=1
    k = math.exp(-0.5)
    post = gp_posterior([0.0], [1.0], [1.0], KernelHyper(1.0, 0.5), include_noise=False)
    assert post.mean[0] == pytest.approx(k / 1.5, abs=1e-14)
    assert post.var[0] == pytest.approx(1.0 - k * k / 1.5, abs=1e-14)
    noisy = gp_posterior([0.0], [1.0], [1.0], KernelHyper(1.0, 0.5), include_noise=True)
    assert noisy.var[0] == pytest.approx(1.5 - k * k / 1.5, abs=1e-14)


@given(seed=st.integers(0, 2**31 - 1), n=st.integers(1, 8), m=st.integers(1, 5))
def test_posterior_matches_gaussian_conditioning_property(seed, n, m):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-3, 3, n)
    xq = rng.uniform(-3, 3, m)
    y = rng.normal(size=n)
    hyper = KernelHyper(float(rng.uniform(0.3, 2.0)), float(rng.uniform(0.01, 0.5)))
    post = gp_posterior(x, y, xq, hyper, include_noise=False)
    K = gram(x, hyper)
    kq = cross_gram(xq, x, hyper.lengthscale)
    ref_mean = kq @ np.linalg.solve(K, y)
    ref_cov = cross_gram(xq, xq, hyper.lengthscale) - kq @ np.linalg.solve(K, kq.T)
    assert np.allclose(post.mean, ref_mean, atol=1e-9)
    assert np.allclose(post.cov, ref_cov, atol=1e-9)
    assert np.all(post.var >= 0)
    assert np.all(post.var <= 1.0 + 1e-12)


@given(seed=st.integers(0, 2**31 - 1), n=st.integers(1, 10))
def test_gram_is_psd_property(seed, n):
    rng = np.random.default_rng(seed)
    K = gram(rng.normal(size=n), KernelHyper(float(rng.uniform(0.1, 3)), 1e-6))
    assert np.array_equal(K, K.T)
    assert np.min(np.linalg.eigvalsh(K)) > -1e-10


def test_input_grad_hand_values():
    assert se_kernel_input_grad(0.4, 0.4, 2.0) == 0.0
    assert se_kernel_input_grad(1.0, 0.0, 1.0) == pytest.approx(-math.exp(-0.5), abs=1e-15)


def test_gram_examples():
    assert np.allclose(gram([0.7, 0.7], KernelHyper(3.0, 0.1)), [[1.1, 1.0], [1.0, 1.1]])
    assert gram([], KernelHyper()).shape == (0, 0)


def test_log_marginal_scaling_identity(rng):
    A = rng.normal(size=(4, 4))
    K = A @ A.T + np.eye(4)
    c = 3.7
    diff = log_marginal(np.zeros(4), c * K) - log_marginal(np.zeros(4), K)
    assert diff == pytest.approx(-2.0 * math.log(c), abs=1e-12)


def test_posterior_sine_matches_dense_oracle():
    x = np.linspace(0, 3, 5)
    y = np.sin(x)
    hyper = KernelHyper(1.0, 1e-6)
    post = gp_posterior(x, y, [1.5], hyper)
    K = np.exp(-0.5 * (x[:, None] - x[None, :]) ** 2) + 1e-6 * np.eye(5)
    k = np.exp(-0.5 * (1.5 - x) ** 2)
    # independent solver: LU instead of Cholesky
    from scipy.linalg import lu_factor, lu_solve
    lu = lu_factor(K)
    assert post.mean[0] == pytest.approx(k @ lu_solve(lu, y), abs=1e-8)
    assert post.var[0] == pytest.approx(1.0 + 1e-6 - k @ lu_solve(lu, k), abs=1e-8)


def test_identity_cholesky():
    L, jitter = chol_psd(np.eye(3))
    assert np.array_equal(L, np.eye(3)) and jitter == 0.0
