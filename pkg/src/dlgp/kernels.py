"""Backend selection for the squared-exponential kernel core.

The compiled extension is used when it imports; otherwise, or when the
environment variable ``DLGP_PURE_PYTHON`` is set to a non-empty value other
than ``0``, the numpy implementation is used. ``BACKEND`` names the choice.
"""
import os

import numpy as np

from . import _kernels_py

_impl = _kernels_py
BACKEND = "python"

if os.environ.get("DLGP_PURE_PYTHON", "") in ("", "0"):
    try:
        from . import _kernels_ext as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _kernels_py


def _vec(x):
    return np.ascontiguousarray(x, dtype=np.float64).reshape(-1)


def se_gram(x, x2, lengthscale):
    """Cross Gram matrix ``exp(-0.5 * ((x[i] - x2[j]) / lengthscale)**2)``."""
    return _impl.se_gram(_vec(x), _vec(x2), float(lengthscale))


def se_gram_sym(x, lengthscale):
    """Gram matrix of ``x`` with itself; exactly symmetric with unit diagonal."""
    return _impl.se_gram_sym(_vec(x), float(lengthscale))


def se_grad_contract(x, weights, lengthscale):
    """Contract a weight matrix against the kernel's input derivative.

    Returns ``out[n] = sum_m weights[n, m] * d k(x[n], x[m]) / d x[n]``, the
    gradient of ``sum(weights * K)`` with respect to ``x`` when ``weights``
    is symmetric, halved.
    """
    w = np.ascontiguousarray(weights, dtype=np.float64)
    return _impl.se_grad_contract(_vec(x), w, float(lengthscale))
