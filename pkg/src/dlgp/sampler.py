"""Slice sampling: univariate stepping-out and multivariate hypercube variants.

Both samplers take an explicit ``numpy.random.Generator`` and a
log-density. Every draw returned satisfies ``logp > log_u``; the check is
enforced, not assumed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .errors import DomainError, NumericalError

MIN_BRACKET = 1e-12


@dataclass(frozen=True)
class SliceConfig:
    """Bracket width (scalar or per-dimension) and stepping-out limit."""

    width: float | tuple = 1.0
    max_stepouts: int = 10

    def __post_init__(self):
        w = np.asarray(self.width, dtype=float)
        if not np.all(w > 0) or not np.all(np.isfinite(w)):
            raise DomainError(f"slice width must be positive, got {self.width}")
        if self.max_stepouts < 1:
            raise DomainError("max_stepouts must be >= 1")


class SliceDraw(NamedTuple):
    x: float | np.ndarray
    logp: float
    log_u: float
    n_evals: int


def _start(log_density, x0, logp0):
    if logp0 is None:
        logp0 = log_density(x0)
    if not math.isfinite(logp0):
        raise DomainError(f"log density at the starting point is {logp0}")
    return logp0


def slice_sample_1d(log_density: Callable[[float], float], x0: float,
                    config: SliceConfig, rng: np.random.Generator,
                    logp0: float | None = None) -> SliceDraw:
    """One stepping-out/shrinkage slice-sampling update of a scalar."""
    x0 = float(x0)
    logp0 = _start(log_density, x0, logp0)
    w = float(np.asarray(config.width, dtype=float).reshape(-1)[0])
    log_u = logp0 + math.log(rng.random() or 1e-300)
    left = x0 - w * rng.random()
    right = left + w
    evals = 0
    for _ in range(config.max_stepouts):
        evals += 1
        if log_density(left) <= log_u:
            break
        left -= w
    for _ in range(config.max_stepouts):
        evals += 1
        if log_density(right) <= log_u:
            break
        right += w
    while True:
        if right - left < MIN_BRACKET:
            raise NumericalError(f"slice bracket collapsed around {x0} without acceptance")
        x1 = left + (right - left) * rng.random()
        logp1 = log_density(x1)
        evals += 1
        if logp1 > log_u:
            return SliceDraw(x1, float(logp1), log_u, evals)
        if x1 < x0:
            left = x1
        else:
            right = x1


def slice_sample_hypercube(log_density: Callable[[np.ndarray], float], x0,
                           config: SliceConfig, rng: np.random.Generator,
                           logp0: float | None = None) -> SliceDraw:
    """One multivariate slice-sampling update with a shrinking hypercube.

    The hypercube has side ``width[k]`` in dimension ``k`` and is placed
    uniformly at random around ``x0``. Rejected proposals shrink each side
    toward ``x0`` independently; there is no stepping out.
    """
    x0 = np.array(x0, dtype=float).reshape(-1)
    logp0 = _start(log_density, x0, logp0)
    w = np.broadcast_to(np.asarray(config.width, dtype=float), x0.shape)
    log_u = logp0 + math.log(rng.random() or 1e-300)
    lower = x0 - w * rng.random(x0.size)
    upper = lower + w
    evals = 0
    while True:
        if np.max(upper - lower) < MIN_BRACKET:
            raise NumericalError("hypercube collapsed without acceptance")
        x1 = lower + (upper - lower) * rng.random(x0.size)
        logp1 = log_density(x1)
        evals += 1
        if logp1 > log_u:
            return SliceDraw(x1, float(logp1), log_u, evals)
        below = x1 < x0
        lower = np.where(below, x1, lower)
        upper = np.where(below, upper, x1)


def sample_chain(sampler, log_density, x0, n, config, rng):
    """Run ``n`` successive updates and stack the states."""
    out = []
    x, logp = x0, None
    for _ in range(n):
        draw = sampler(log_density, x, config, rng, logp0=logp)
        if not draw.logp > draw.log_u:
            raise AssertionError("slice membership violated")
        x, logp = draw.x, draw.logp
        out.append(np.copy(x))
    return np.array(out)
