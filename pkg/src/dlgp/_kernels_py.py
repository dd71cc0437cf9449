"""Pure-numpy squared-exponential kernels (fallback for the compiled core)."""
import numpy as np


def se_gram(x, x2, lengthscale):
    x = np.asarray(x, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    d = (x[:, None] - x2[None, :]) / lengthscale
    return np.exp(-0.5 * d * d)


def se_gram_sym(x, lengthscale):
    return se_gram(x, x, lengthscale)


def se_grad_contract(x, weights, lengthscale):
    """Return ``out[n] = sum_m weights[n, m] * dk(x[n], x[m]) / dx[n]``."""
    x = np.asarray(x, dtype=np.float64)
    diff = x[:, None] - x[None, :]
    k = np.exp(-0.5 * (diff / lengthscale) ** 2)
    return np.sum(weights * (-diff / lengthscale**2) * k, axis=1)
