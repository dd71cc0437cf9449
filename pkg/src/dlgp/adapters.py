"""Model adapters for :func:`dlgp.metrics.benchmark`.

Each adapter has ``fit(train, split_id)`` and ``predict(theta)`` returning an
:class:`~dlgp.metrics.AdapterPrediction` in original units.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from . import model as dl
from . import net, quantile
from .data_io import TrainingDataset
from .errors import NumericalError
from .gp_core import KernelHyper, gp_posterior, gram, log_marginal
from .metrics import AdapterPrediction
from .sampler import SliceConfig

Z90 = dl.z_value(0.90)


class MeanAdapter:
    """Predicts the training mean with the training variance."""

    name = "mean"

    def fit(self, train: TrainingDataset, split_id=0):
        self.mu = train.y.mean(axis=0)
        self.var = np.maximum(train.y.var(axis=0), 1e-12)
        return self

    def predict(self, theta):
        m = np.atleast_2d(theta).shape[0]
        mean = np.tile(self.mu, (m, 1))
        var = np.tile(self.var, (m, 1))
        sd = np.sqrt(var)
        return AdapterPrediction(mean, var, mean - Z90 * sd, mean + Z90 * sd)


class GpAdapter:
    """Homoskedastic SE-kernel GP with amplitude, lengthscale and nugget fitted by maximum likelihood.

    Inputs and outputs are standardized on the training split. Handles one
    input dimension per GP; multi-column inputs use the first column.
    """

    name = "gp"
    starts = ((-1.5, -2.0), (-0.5, -1.0), (0.5, -3.0))

    def fit(self, train: TrainingDataset, split_id=0):
        self.train = train
        x = train.input_stats.apply(train.theta)[:, 0]
        y = train.output_stats.apply(train.y)
        self.x, self.y = x, y
        self.hypers = []
        for i in range(train.p):
            self.hypers.append(self._fit_one(x, y[:, i]))
        return self

    def _fit_one(self, x, y):
        def nll(v):
            ls, g, a = np.exp(v)
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    return -log_marginal(y, a * a * gram(x, KernelHyper(ls, g)))
            except NumericalError:
                return 1e10

        best = None
        for ls0, g0 in self.starts:
            res = minimize(nll, np.array([ls0, g0, 0.0]), method="L-BFGS-B",
                           bounds=[(-5, 5), (-12, 2), (-3, 3)])
            if best is None or res.fun < best.fun:
                best = res
        ls, g, a = np.exp(best.x)
        return KernelHyper(ls, g), a

    def predict(self, theta):
        xq = self.train.input_stats.apply(np.atleast_2d(theta))[:, 0]
        means, vars_ = [], []
        for i, (hyper, a) in enumerate(self.hypers):
            post = gp_posterior(self.x, self.y[:, i] / a, xq, hyper, include_noise=True)
            means.append(post.mean * a)
            vars_.append(post.var * a * a)
        mean = self.train.output_stats.invert(np.column_stack(means))
        var = np.column_stack(vars_) * self.train.output_stats.sd**2
        var = np.maximum(var, 1e-300)
        sd = np.sqrt(var)
        return AdapterPrediction(mean, var, mean - Z90 * sd, mean + Z90 * sd)


@dataclass
class DlgpSettings:
    layers: str = "16:tanh, 2:identity"
    learning_rate: float = 0.05
    n_steps: int = 600
    slice_interval: int = 100
    slice_width: float = 1.0
    noise_sd: float = 0.3
    lengthscale: float = 1.0
    nugget: float = 1e-3
    mode: str = "full"
    n_restarts: int = 1
    seed: int = 0


class DlgpAdapter:
    """DL-GP trained from ``n_restarts`` seeds; the highest final likelihood wins."""

    name = "dlgp"

    def __init__(self, settings: DlgpSettings | None = None):
        self.settings = settings or DlgpSettings()

    def fit(self, train: TrainingDataset, split_id=0):
        st = self.settings
        specs = net.parse_layers(st.layers, train.d)
        best = None
        for k in range(max(1, st.n_restarts)):
            seed = st.seed + 7919 * split_id + 104729 * k
            m0 = dl.init_model(train, specs, seed=seed, noise_sd=st.noise_sd, lengthscale=st.lengthscale,
                               nugget=st.nugget, mode=st.mode)
            cfg = dl.TrainConfig(st.learning_rate, st.n_steps, st.slice_interval,
                                 SliceConfig(st.slice_width), seed)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                fitted, trace = dl.train(m0, train, cfg)
                ll = dl.dlgp_log_marginal(fitted, train)
            if best is None or ll > best[0]:
                best = (ll, fitted, trace)
        _, self.model, self.trace = best
        self.train = train
        return self

    def predict(self, theta):
        mean, cov = dl.predict_arrays(self.model, self.train, theta)
        var = np.maximum(np.diagonal(cov, axis1=1, axis2=2), 1e-300)
        sd = np.sqrt(var)
        return AdapterPrediction(mean, var, mean - Z90 * sd, mean + Z90 * sd)


@dataclass
class QdlSettings:
    hidden: str = "16:tanh, 16:tanh"
    levels: tuple = quantile.MOTORCYCLE_QUANTILES
    learning_rate: float = 0.05
    n_steps: int = 3000
    seed: int = 0


class QdlAdapter:
    """Quantile deep learner; its 0.05-0.95 band is the 90% interval and it has no density."""

    name = "qdl"

    def __init__(self, settings: QdlSettings | None = None):
        self.settings = settings or QdlSettings()

    def fit(self, train: TrainingDataset, split_id=0):
        st = self.settings
        k = len(st.levels)
        specs = net.parse_layers(st.hidden + f", {k}:identity", train.d)
        cfg = quantile.QuantileNetConfig(st.learning_rate, st.n_steps, st.seed + 7919 * split_id)
        self.qnet = quantile.train_quantile_dl(train, st.levels, specs, cfg)
        return self

    def predict(self, theta):
        heads = self.qnet.predict(theta)
        median = heads[:, int(np.argmin(np.abs(self.qnet.levels - 0.5)))]
        lo, hi = self.qnet.interval(theta)
        return AdapterPrediction(median[:, None], None, lo[:, None], hi[:, None])


ADAPTERS = {"dlgp": DlgpAdapter, "gp": GpAdapter, "qdl": QdlAdapter, "mean": MeanAdapter}
