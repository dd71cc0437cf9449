"""Univariate Gaussian process machinery.

Squared-exponential kernel with unit amplitude, nugget-augmented Gram
matrices, a jittered Cholesky, the Gaussian log marginal likelihood and the
posterior mean/covariance. These functions are used standalone (the plain GP
baseline) and as the latent components of :mod:`dlgp.model`.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, lapack, solve_triangular

from . import kernels
from .errors import DomainError, InputError, JitterWarning, NumericalError

LOG_2PI = math.log(2.0 * math.pi)

JITTER_START = 1e-10
JITTER_MAX = 1e-4


@dataclass(frozen=True)
class KernelHyper:
    """Lengthscale and nugget of one SE kernel."""

    lengthscale: float = 1.0
    nugget: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.lengthscale) and self.lengthscale > 0):
            raise DomainError(f"lengthscale must be positive and finite, got {self.lengthscale}")
        if not (math.isfinite(self.nugget) and self.nugget >= 0):
            raise DomainError(f"nugget must be nonnegative and finite, got {self.nugget}")


@dataclass
class GpPosterior:
    mean: np.ndarray
    cov: np.ndarray

    @property
    def var(self):
        return np.diag(self.cov).copy()


def _check_lengthscale(lengthscale):
    if not lengthscale > 0:
        raise DomainError(f"lengthscale must be positive, got {lengthscale}")


def se_kernel(x, x2, lengthscale):
    """Squared-exponential kernel ``exp(-0.5 * ((x - x2) / lengthscale)**2)``.

    Broadcasts over array arguments. Far-field values underflow to 0.
    """
    _check_lengthscale(lengthscale)
    d = (np.asarray(x, dtype=float) - np.asarray(x2, dtype=float)) / lengthscale
    out = np.exp(-0.5 * d * d)
    return float(out) if out.ndim == 0 else out


def se_kernel_input_grad(x, x2, lengthscale):
    """Derivative of :func:`se_kernel` with respect to its first argument."""
    _check_lengthscale(lengthscale)
    diff = np.asarray(x, dtype=float) - np.asarray(x2, dtype=float)
    out = -(diff / lengthscale**2) * np.exp(-0.5 * (diff / lengthscale) ** 2)
    return float(out) if out.ndim == 0 else out


def _finite_vector(xs, name="xs"):
    xs = np.asarray(xs, dtype=float).reshape(-1)
    if not np.all(np.isfinite(xs)):
        raise InputError(f"{name} contains non-finite values")
    return xs


def gram(xs, hyper: KernelHyper):
    """Gram matrix of ``xs`` plus ``hyper.nugget`` on the diagonal."""
    xs = _finite_vector(xs)
    K = kernels.se_gram_sym(xs, hyper.lengthscale)
    K[np.diag_indices_from(K)] += hyper.nugget
    return K


def cross_gram(xs, xs2, lengthscale):
    return kernels.se_gram(_finite_vector(xs), _finite_vector(xs2, "xs2"), lengthscale)


def chol_psd(K):
    """Lower Cholesky factor of a symmetric matrix, adding jitter on failure.

    Jitter starts at 1e-10 and grows tenfold up to 1e-4; it is added only if
    the plain factorization fails.

    Returns
    -------
    L : ndarray
        Lower-triangular factor with ``L @ L.T == K + jitter * I``.
    jitter : float
        The jitter that was needed (0.0 when none).

    Raises
    ------
    NumericalError
        If even the maximum jitter fails. The message names the first
        leading minor (pivot) that was not positive.
    """
    K = np.asarray(K, dtype=float)
    n = K.shape[0]
    if n == 0:
        return np.zeros((0, 0)), 0.0
    jitter = 0.0
    eye = np.eye(n)
    while True:
        A = K if jitter == 0.0 else K + jitter * eye
        L, info = lapack.dpotrf(A, lower=1, clean=1, overwrite_a=0)
        if info == 0:
            if jitter > JITTER_START:
                warnings.warn(f"Cholesky needed jitter {jitter:.1e}", JitterWarning, stacklevel=2)
            return L, jitter
        if info < 0:
            raise NumericalError(f"dpotrf rejected argument {-info}")
        if jitter == 0.0:
            jitter = JITTER_START
        elif jitter < JITTER_MAX * 0.999:
            jitter *= 10.0
        else:
            raise NumericalError(
                f"matrix not positive definite at pivot {info} (of {n}) "
                f"even with jitter {jitter:.1e}"
            )


def log_marginal(y, K):
    """Gaussian log density of ``y`` under ``N(0, K)``."""
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.shape[0] != K.shape[0]:
        raise InputError(f"y has length {y.shape[0]} but K is {K.shape[0]}x{K.shape[0]}")
    if not np.all(np.isfinite(y)):
        raise InputError("y contains non-finite values")
    n = y.shape[0]
    if n == 0:
        return 0.0
    L, _ = chol_psd(K)
    z = solve_triangular(L, y, lower=True)
    return float(-0.5 * z @ z - np.sum(np.log(np.diag(L))) - 0.5 * n * LOG_2PI)


def gp_posterior(train_x, train_y, query_x, hyper: KernelHyper, mean_fn=0.0,
                 include_noise=True) -> GpPosterior:
    """Posterior of a univariate GP with constant prior mean ``mean_fn``.

    With ``include_noise`` the nugget is added to the query covariance,
    giving the distribution of a new noisy observation; without it the
    latent function's posterior is returned.
    """
    train_x = _finite_vector(train_x, "train_x")
    train_y = _finite_vector(train_y, "train_y")
    query_x = _finite_vector(query_x, "query_x")
    if train_x.shape != train_y.shape:
        raise InputError("train_x and train_y differ in length")
    prior = kernels.se_gram_sym(query_x, hyper.lengthscale)
    if include_noise:
        prior[np.diag_indices_from(prior)] += hyper.nugget
    mean = np.full(query_x.shape[0], float(mean_fn))
    if train_x.shape[0] == 0:
        return GpPosterior(mean, prior)
    L, _ = chol_psd(gram(train_x, hyper))
    kq = kernels.se_gram(query_x, train_x, hyper.lengthscale)
    alpha = cho_solve((L, True), train_y - mean_fn)
    mean = mean + kq @ alpha
    V = solve_triangular(L, kq.T, lower=True)
    cov = prior - V.T @ V
    return GpPosterior(mean, _tidy_cov(cov))


def _tidy_cov(cov):
    cov = 0.5 * (cov + cov.T)
    d = np.diag(cov)
    if np.any(d < 0):
        cov[np.diag_indices_from(cov)] = np.maximum(d, 0.0)
    return cov
