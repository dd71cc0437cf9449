"""Deep-learning Gaussian process surrogate.

A network maps (standardized) inputs to ``q`` latent features; each feature
carries an independent unit-amplitude SE Gaussian process ``f_j``; the
``p`` outputs are ``b + W f + e`` with independent output noise
``e_i ~ N(0, sigma_i^2)``. The induced joint covariance over ``N`` rows is

    C = sum_j (w_j w_j^T) kron K_j + diag(sigma^2) kron I_N,

where ``K_j`` includes the nugget ``r_j`` on its diagonal. Vectors over
(output, row) pairs are laid out output-major, i.e. index ``i * N + n``.

Likelihood, gradients and predictions never materialize ``C``. Writing
``C = D + U U^T`` with ``D = diag(sigma^2) kron I`` and
``U = (W kron I) blockdiag(L_j)``, everything reduces to the ``qN x qN``
capacitance matrix ``M = I + U^T D^-1 U``. The result is exact; the dense
:func:`joint_covariance` exists for inspection and for small problems.
"""
from __future__ import annotations

import json
import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.stats import norm

from . import kernels, net
from .data_io import Standardizer, TrainingDataset
from .errors import ConfigError, FormatError, InputError, NumericalError, ResourceError, TrainingError
from .gp_core import LOG_2PI, KernelHyper, chol_psd, gram
from .sampler import SliceConfig, slice_sample_hypercube

log = logging.getLogger(__name__)

DENSE_CAP = 4000
MODES = ("full", "per_output")
LOG_LENGTHSCALE_BOUNDS = (-5.0, 5.0)
LOG_NUGGET_BOUNDS = (-12.0, 2.0)


@dataclass
class DlgpModel:
    network: net.NetworkParams
    mixture: np.ndarray
    bias: np.ndarray
    noise_sd: np.ndarray
    kernels: list
    input_stats: Standardizer
    output_stats: Standardizer
    mode: str = "full"

    def __post_init__(self):
        self.mixture = np.atleast_2d(np.asarray(self.mixture, dtype=float))
        self.bias = np.asarray(self.bias, dtype=float).reshape(-1)
        self.noise_sd = np.asarray(self.noise_sd, dtype=float).reshape(-1)
        p, q = self.mixture.shape
        if self.network.latent_dim != q:
            raise ConfigError(f"network produces {self.network.latent_dim} features but mixture has {q} columns")
        if len(self.kernels) != q:
            raise ConfigError(f"need {q} kernel hyperparameter records, got {len(self.kernels)}")
        if self.bias.shape != (p,) or self.noise_sd.shape != (p,):
            raise ConfigError("bias and noise_sd must have one entry per output")
        if not np.all(self.noise_sd > 0):
            raise ConfigError("noise_sd must be positive")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")

    @property
    def p(self):
        return self.mixture.shape[0]

    @property
    def q(self):
        return self.mixture.shape[1]

    @property
    def d(self):
        return self.network.input_dim

    def copy(self):
        return replace(self, network=self.network.copy(), mixture=self.mixture.copy(),
                       bias=self.bias.copy(), noise_sd=self.noise_sd.copy(),
                       kernels=list(self.kernels))


@dataclass
class TrainConfig:
    learning_rate: float = 1e-2
    n_steps: int = 500
    slice_interval: int = 25
    slice_config: SliceConfig = field(default_factory=SliceConfig)
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be positive")
        if self.n_steps < 0 or self.slice_interval < 1:
            raise ConfigError("n_steps must be >= 0 and slice_interval >= 1")


@dataclass
class PosteriorPrediction:
    mean: np.ndarray
    cov: np.ndarray
    lo: np.ndarray
    hi: np.ndarray

    @property
    def sd(self):
        return np.sqrt(np.maximum(np.diag(self.cov), 0.0))


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------

def init_model(data: TrainingDataset, specs, seed=0, noise_sd=0.3, lengthscale=1.0,
               nugget=1e-3, mode="full") -> DlgpModel:
    """Random network, PCA-initialized mixture, zero bias.

    Mixture columns are the leading principal loadings of the standardized
    outputs (random directions fill any columns beyond the output rank).
    """
    network = net.init_network(specs, seed)
    if network.input_dim != data.d:
        raise ConfigError(f"first layer expects {network.input_dim} inputs, data has {data.d}")
    q, p = network.latent_dim, data.p
    rng = np.random.default_rng([seed, 1])
    mixture = rng.standard_normal((p, q)) * 0.5 / math.sqrt(q)
    y = data.output_stats.apply(data.y)
    if data.n > 1:
        _, sv, vt = np.linalg.svd(y - y.mean(axis=0), full_matrices=False)
        k = min(q, int(np.sum(sv > 1e-8 * max(sv[0], 1e-300))))
        mixture[:, :k] = vt[:k].T * (sv[:k] / math.sqrt(data.n))
    return DlgpModel(network, mixture, np.zeros(p), np.full(p, noise_sd),
                     [KernelHyper(lengthscale, nugget) for _ in range(q)],
                     data.input_stats, data.output_stats, mode)


# ---------------------------------------------------------------------------
# structured linear algebra
# ---------------------------------------------------------------------------

class _Lmc:
    """Low-rank factorization ``C = D + U U^T`` of the joint covariance."""

    def __init__(self, Ks, Ls, W, s):
        self.Ks, self.Ls, self.W, self.s = Ks, Ls, W, s
        self.p, self.q = W.shape
        self.N = N = Ks[0].shape[0]
        q = self.q
        self.c = W.T @ (W / s[:, None])
        self.LtL = [[Ls[j].T @ Ls[k] for k in range(q)] for j in range(q)]
        M = np.eye(q * N)
        for j in range(q):
            for k in range(q):
                M[j * N:(j + 1) * N, k * N:(k + 1) * N] += self.c[j, k] * self.LtL[j][k]
        try:
            self.Mchol = cho_factor(M, lower=True, check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"capacitance matrix not positive definite: {exc}") from None
        self.logdet = N * float(np.sum(np.log(s))) + 2.0 * float(np.sum(np.log(np.diag(self.Mchol[0]))))

    def _ut(self, t):
        """``U^T t`` for ``t`` of shape (p, N) -> (q*N,)."""
        u = self.W.T @ t
        return np.concatenate([self.Ls[j].T @ u[j] for j in range(self.q)])

    def _u(self, z):
        x = np.stack([self.Ls[j] @ z[j * self.N:(j + 1) * self.N] for j in range(self.q)])
        return self.W @ x

    def solve(self, r):
        """``C^-1 r`` for ``r`` of shape (p, N)."""
        t = r / self.s[:, None]
        z = cho_solve(self.Mchol, self._ut(t), check_finite=False)
        return t - self._u(z) / self.s[:, None]

    def pieces(self, need_trace=True):
        """Quantities shared by gradients and prediction.

        Returns ``H = A^T C^-1 A`` (``A = W kron I``, shape qN x qN), the
        per-output traces of the diagonal blocks of ``C^-1`` and
        ``R[i, j] = tr([C^-1 A]_(i, j) K_j)``.
        """
        N, q, W, s = self.N, self.q, self.W, self.s
        X = np.zeros((q * N, q * N))
        for j in range(q):
            for k in range(q):
                X[j * N:(j + 1) * N, k * N:(k + 1) * N] = self.c[j, k] * self.Ls[k]
        Minv = cho_solve(self.Mchol, np.eye(q * N), check_finite=False)
        Y = Minv @ X.T
        H = np.kron(self.c, np.eye(N)) - X @ Y
        if not need_trace:
            return 0.5 * (H + H.T), None, None
        Z = np.concatenate([self.Ls[j] @ Y[j * N:(j + 1) * N] for j in range(q)])
        Q = np.array([[np.sum(Z[k * N:(k + 1) * N, j * N:(j + 1) * N] * self.Ks[j]) for j in range(q)]
                      for k in range(q)])
        trK = np.array([np.trace(K) for K in self.Ks])
        R = (W * trK[None, :] - W @ Q) / s[:, None]
        P = np.array([[np.sum(self.LtL[j][k] * Minv[j * N:(j + 1) * N, k * N:(k + 1) * N]) for k in range(q)]
                      for j in range(q)])
        tr_cinv = N / s - np.einsum("ij,jk,ik->i", W, P, W) / s**2
        return 0.5 * (H + H.T), tr_cinv, R


class _Dense:
    """Direct Cholesky of the ``Np x Np`` joint covariance; cheaper when ``p <= q``."""

    def __init__(self, Ks, W, s):
        self.Ks, self.W, self.s = Ks, W, s
        self.p, self.q = W.shape
        self.N = N = Ks[0].shape[0]
        C = np.kron(np.diag(s), np.eye(N))
        for j in range(self.q):
            C += np.kron(np.outer(W[:, j], W[:, j]), Ks[j])
        L, _ = chol_psd(C)
        self.L = L
        self.logdet = 2.0 * float(np.sum(np.log(np.diag(L))))

    def solve(self, r):
        return cho_solve((self.L, True), r.reshape(-1), check_finite=False).reshape(self.p, self.N)

    def pieces(self, need_trace=True):
        p, N, q = self.p, self.N, self.q
        Cinv = cho_solve((self.L, True), np.eye(p * N), check_finite=False).reshape(p, N, p, N)
        CinvA = np.einsum("inkm,kj->injm", Cinv, self.W)
        H = np.einsum("ij,inlm->jnlm", self.W, CinvA).reshape(q * N, q * N)
        if not need_trace:
            return 0.5 * (H + H.T), None, None
        R = np.einsum("injm,jmn->ij", CinvA, np.stack(self.Ks))
        tr_cinv = np.einsum("inin->i", Cinv)
        return 0.5 * (H + H.T), tr_cinv, R


def _make_system(Ks, Ls, W, s):
    p, q = W.shape
    if p <= q and Ks[0].shape[0] * p <= DENSE_CAP:
        return _Dense(Ks, W, s)
    return _Lmc(Ks, Ls, W, s)


def _loglik_system(sys, r):
    alpha = sys.solve(r)
    return -0.5 * float(np.sum(r * alpha)) - 0.5 * sys.logdet - 0.5 * r.size * LOG_2PI, alpha


def _block(mat, N, j, k):
    return mat[j * N:(j + 1) * N, k * N:(k + 1) * N]


def _kernel_factors(psi, hypers):
    Ks, Ls = [], []
    for j, h in enumerate(hypers):
        K = gram(psi[:, j], h)
        L, _ = chol_psd(K)
        Ks.append(K)
        Ls.append(L)
    return Ks, Ls


def _systems(model, psi, factors=None):
    """One system for the full model, or one per output in per-output mode."""
    s = model.noise_sd**2
    if factors is None:
        factors = _kernel_factors(psi, model.kernels)
    Ks, Ls = factors
    if model.mode == "full":
        return [(slice(None), _make_system(Ks, Ls, model.mixture, s))]
    return [(slice(i, i + 1), _make_system(Ks, Ls, model.mixture[i:i + 1], s[i:i + 1]))
            for i in range(model.p)]


def _standardized(model, data):
    theta = model.input_stats.apply(data.theta)
    y = model.output_stats.apply(data.y)
    if theta.shape[1] != model.d or y.shape[1] != model.p:
        raise InputError(f"data has d={theta.shape[1]}, p={y.shape[1]}; model expects d={model.d}, p={model.p}")
    return theta, y


# ---------------------------------------------------------------------------
# dense joint covariance
# ---------------------------------------------------------------------------

def joint_covariance(psi, model: DlgpModel, include_noise=True, cap=DENSE_CAP):
    """Dense ``(N p) x (N p)`` joint covariance, output-major ordering."""
    psi = np.atleast_2d(np.asarray(psi, dtype=float))
    N, p = psi.shape[0], model.p
    if N * p > cap:
        raise ResourceError(
            f"N*p = {N * p} exceeds the dense cap {cap}; use the structured likelihood "
            "or mode='per_output'"
        )
    C = np.zeros((N * p, N * p))
    for j, h in enumerate(model.kernels):
        C += np.kron(np.outer(model.mixture[:, j], model.mixture[:, j]), gram(psi[:, j], h))
    if include_noise:
        C += np.kron(np.diag(model.noise_sd**2), np.eye(N))
    return C


# ---------------------------------------------------------------------------
# likelihood and gradients
# ---------------------------------------------------------------------------

def _loglik_psi(model, psi, y, factors=None):
    total = 0.0
    for rows, sys in _systems(model, psi, factors):
        r = (y[:, rows] - model.bias[rows]).T
        ll, _ = _loglik_system(sys, r)
        total += ll
    return total


def dlgp_log_marginal(model: DlgpModel, data: TrainingDataset) -> float:
    """Log marginal likelihood of the standardized outputs."""
    theta, y = _standardized(model, data)
    if theta.shape[0] == 0:
        return 0.0
    psi, _ = net.forward(model.network, theta)
    return _loglik_psi(model, psi, y)


@dataclass
class Gradients:
    network: list
    mixture: np.ndarray
    bias: np.ndarray
    log_noise_sd: np.ndarray
    loglik: float
    psi: np.ndarray = None

    def to_vector(self):
        return np.concatenate([net.grads_to_vector(self.network), self.mixture.ravel(),
                               self.bias, self.log_noise_sd])


def _grad_system(sys, r):
    """Gradients of one system's log-likelihood with respect to its pieces."""
    N, q, W, s = sys.N, sys.q, sys.W, sys.s
    ll, alpha = _loglik_system(sys, r)
    a = W.T @ alpha
    H, tr_cinv, R = sys.pieces()
    gbar = [np.outer(a[j], a[j]) - _block(H, N, j, j) for j in range(q)]
    Ka = np.stack([sys.Ks[j] @ a[j] for j in range(q)])
    dW = alpha @ Ka.T - R
    db = alpha.sum(axis=1)
    dlogsd = s * (np.sum(alpha**2, axis=1) - tr_cinv)
    return ll, gbar, dW, db, dlogsd


def _gradients_psi(model, psi, y):
    ll = 0.0
    q = model.q
    gbar_tot = [np.zeros((psi.shape[0], psi.shape[0])) for _ in range(q)]
    dW = np.zeros_like(model.mixture)
    db = np.zeros(model.p)
    dls = np.zeros(model.p)
    for rows, sys in _systems(model, psi):
        r = (y[:, rows] - model.bias[rows]).T
        l_i, gbar, dW_i, db_i, dls_i = _grad_system(sys, r)
        ll += l_i
        for j in range(q):
            gbar_tot[j] += gbar[j]
        dW[rows] += dW_i
        db[rows] += db_i
        dls[rows] += dls_i
    grad_psi = np.column_stack([
        kernels.se_grad_contract(psi[:, j], gbar_tot[j], model.kernels[j].lengthscale) for j in range(q)
    ])
    return ll, grad_psi, dW, db, dls


def dlgp_gradients(model: DlgpModel, data: TrainingDataset) -> Gradients:
    """Exact gradients of :func:`dlgp_log_marginal`.

    Covers network weights, mixture, bias and log noise sd. Kernel
    hyperparameters are left to the slice sampler.
    """
    theta, y = _standardized(model, data)
    psi, cache = net.forward(model.network, theta)
    ll, grad_psi, dW, db, dls = _gradients_psi(model, psi, y)
    net_grads, _ = net.backward(model.network, cache, grad_psi)
    return Gradients(net_grads, dW, db, dls, ll, psi)


def _pack(model):
    return np.concatenate([model.network.to_vector(), model.mixture.ravel(), model.bias,
                           np.log(model.noise_sd)])


def _unpack(model, vec):
    n_net = model.network.to_vector().size
    p, q = model.mixture.shape
    pos = n_net
    network = model.network.from_vector(vec[:n_net])
    mixture = vec[pos:pos + p * q].reshape(p, q)
    pos += p * q
    bias = vec[pos:pos + p]
    pos += p
    noise_sd = np.exp(vec[pos:pos + p])
    return replace(model, network=network, mixture=mixture.copy(), bias=bias.copy(), noise_sd=noise_sd)


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

def _hyper_vector(model):
    return np.array([math.log(h.lengthscale) for h in model.kernels] +
                    [math.log(max(h.nugget, math.exp(LOG_NUGGET_BOUNDS[0]))) for h in model.kernels])


def _hypers_from(x, q):
    return [KernelHyper(math.exp(x[j]), math.exp(x[q + j])) for j in range(q)]


def _slice_hypers(model, psi, y, config, rng):
    q = model.q
    lo = np.array([LOG_LENGTHSCALE_BOUNDS[0]] * q + [LOG_NUGGET_BOUNDS[0]] * q)
    hi = np.array([LOG_LENGTHSCALE_BOUNDS[1]] * q + [LOG_NUGGET_BOUNDS[1]] * q)

    def target(x):
        if np.any(x < lo) or np.any(x > hi):
            return -np.inf
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                val = _loglik_psi(replace(model, kernels=_hypers_from(x, q)), psi, y)
        except NumericalError:
            return -np.inf
        return val if math.isfinite(val) else -np.inf

    x0 = np.clip(_hyper_vector(model), lo, hi)
    draw = slice_sample_hypercube(target, x0, config.slice_config, rng)
    return replace(model, kernels=_hypers_from(draw.x, q))


def train(model: DlgpModel, data: TrainingDataset, config: TrainConfig):
    """Gradient ascent on the log marginal likelihood with periodic slice sampling.

    Each step records the current log-likelihood, then moves the network,
    mixture, bias and log noise sd by ``learning_rate`` times the gradient
    of the per-observation log-likelihood (total divided by ``N p``).
    After every ``slice_interval`` steps the ``2q`` log kernel
    hyperparameters receive one hypercube slice-sampling update.

    Returns
    -------
    model : DlgpModel
    trace : ndarray of per-step log-likelihoods
    """
    theta, y = _standardized(model, data)
    if config.n_steps == 0:
        return model, np.zeros(0)
    rng = np.random.default_rng(config.seed)
    scale = 1.0 / (theta.shape[0] * model.p)
    trace = np.empty(config.n_steps)
    current = model.copy()
    for step in range(config.n_steps):
        try:
            psi, cache = net.forward(current.network, theta)
            ll, grad_psi, dW, db, dls = _gradients_psi(current, psi, y)
        except (NumericalError, np.linalg.LinAlgError, InputError) as exc:
            raise TrainingError(f"training failed at step {step}: {exc}", step, trace[:step].copy()) from exc
        if not math.isfinite(ll):
            raise TrainingError(f"non-finite log-likelihood at step {step}", step, trace[:step].copy())
        trace[step] = ll
        net_grads, _ = net.backward(current.network, cache, grad_psi)
        grad = np.concatenate([net.grads_to_vector(net_grads), dW.ravel(), db, dls])
        if not np.all(np.isfinite(grad)):
            raise TrainingError(f"non-finite gradient at step {step}", step, trace[:step + 1].copy())
        current = _unpack(current, _pack(current) + config.learning_rate * scale * grad)
        if (step + 1) % config.slice_interval == 0:
            psi, _ = net.forward(current.network, theta)
            current = _slice_hypers(current, psi, y, config, rng)
    return current, trace


# ---------------------------------------------------------------------------
# prediction
# ---------------------------------------------------------------------------

def z_value(level):
    if not 0 < level < 1:
        raise InputError(f"interval level must lie in (0, 1), got {level}")
    return float(norm.ppf(0.5 + level / 2.0))


def predict_arrays(model: DlgpModel, data: TrainingDataset | None, query_theta, include_noise=True):
    """Posterior means ``(M, p)`` and covariances ``(M, p, p)`` in original units."""
    query = np.atleast_2d(np.asarray(query_theta, dtype=float))
    if query.shape[0] == 0:
        raise InputError("empty query")
    if query.shape[1] != model.d:
        raise InputError(f"query has {query.shape[1]} columns, model expects d={model.d}")
    psi_q, _ = net.forward(model.network, model.input_stats.apply(query))
    Mq, p, q = query.shape[0], model.p, model.q
    W = model.mixture
    s = model.noise_sd**2
    noise = 1.0 if include_noise else 0.0
    prior_latent = np.array([1.0 + noise * h.nugget for h in model.kernels])
    if data is None or data.n == 0:
        mean = np.tile(model.bias, (Mq, 1))
        cov = np.tile(W @ np.diag(prior_latent) @ W.T + noise * np.diag(s), (Mq, 1, 1))
    else:
        theta, y = _standardized(model, data)
        psi, _ = net.forward(model.network, theta)
        kc = [kernels.se_gram(psi_q[:, j], psi[:, j], model.kernels[j].lengthscale) for j in range(q)]
        mean = np.empty((Mq, p))
        cov = np.zeros((Mq, p, p))
        for rows, sys in _systems(model, psi):
            r = (y[:, rows] - model.bias[rows]).T
            alpha = sys.solve(r)
            a = sys.W.T @ alpha
            H, _, _ = sys.pieces(need_trace=False)
            latent_mean = np.column_stack([kc[j] @ a[j] for j in range(q)])
            latent_cov = np.zeros((Mq, q, q))
            for j in range(q):
                latent_cov[:, j, j] = prior_latent[j]
                for k in range(q):
                    latent_cov[:, j, k] -= np.einsum("mn,nk,mk->m", kc[j], _block(H, sys.N, j, k), kc[k])
            Wr = sys.W
            mean[:, rows] = model.bias[rows] + latent_mean @ Wr.T
            block = np.einsum("ij,mjk,lk->mil", Wr, latent_cov, Wr)
            if model.mode == "full":
                cov = block + noise * np.diag(s)[None]
            else:
                i = rows.start
                cov[:, i, i] = block[:, 0, 0] + noise * s[i]
    cov = 0.5 * (cov + np.transpose(cov, (0, 2, 1)))
    sd = model.output_stats.sd
    mean = model.output_stats.invert(mean)
    cov = cov * np.outer(sd, sd)[None]
    idx = np.arange(p)
    diag = cov[:, idx, idx]
    cov[:, idx, idx] = np.where(diag < 0, np.maximum(diag, 0.0), diag)
    return mean, cov


def predict(model: DlgpModel, data: TrainingDataset | None, query_theta, level=0.90,
            include_noise=True):
    """Per-query posterior predictions with central ``level`` intervals."""
    mean, cov = predict_arrays(model, data, query_theta, include_noise)
    z = z_value(level)
    out = []
    for m in range(mean.shape[0]):
        sd = np.sqrt(np.maximum(np.diag(cov[m]), 0.0))
        out.append(PosteriorPrediction(mean[m], cov[m], mean[m] - z * sd, mean[m] + z * sd))
    return out


def feature_diagnostics(model: DlgpModel, data: TrainingDataset, tol=1e-3):
    """Spread of each latent feature over the training inputs.

    Returns ``(sd, near_constant)`` arrays of length ``q``. A near-constant
    feature turns its GP into a constant-plus-nugget term.
    """
    theta, _ = _standardized(model, data)
    psi, _ = net.forward(model.network, theta)
    sd = psi.std(axis=0)
    return sd, sd < tol


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

MAGIC = "DLGP-MODEL"
FORMAT_VERSION = (1, 1)
# fields introduced after 1.0 and their defaults
_OPTIONAL_FIELDS = {"mode": "full"}


def _stats_dict(st: Standardizer):
    return {"mean": st.mean.tolist(), "sd": st.sd.tolist(), "constant": st.constant.tolist()}


def _stats_from(d):
    return Standardizer(np.array(d["mean"], dtype=float), np.array(d["sd"], dtype=float),
                        np.array(d.get("constant", [False] * len(d["mean"])), dtype=bool))


def save_model(model: DlgpModel, path, data: TrainingDataset | None = None, meta: dict | None = None):
    """Write the model (and optionally its conditioning data) as versioned JSON text.

    Layout: a first line ``DLGP-MODEL <major>.<minor>`` followed by one JSON
    object with keys ``layers`` (weight, bias, activation per layer, input
    to output), ``mixture`` (p x q), ``bias``, ``noise_sd``, ``kernels``
    (lengthscale, nugget per feature), ``input_stats``, ``output_stats``,
    ``mode`` and, when given, ``data`` (raw theta, y and column names) and
    ``meta`` (free-form JSON-serializable settings, e.g. an output transform).
    Floats are written with ``repr`` precision, so a round trip is exact.
    """
    body = {
        "layers": [{"weight": l.weight.tolist(), "bias": l.bias.tolist(), "activation": l.activation.value}
                   for l in model.network.layers],
        "mixture": model.mixture.tolist(),
        "bias": model.bias.tolist(),
        "noise_sd": model.noise_sd.tolist(),
        "kernels": [{"lengthscale": h.lengthscale, "nugget": h.nugget} for h in model.kernels],
        "input_stats": _stats_dict(model.input_stats),
        "output_stats": _stats_dict(model.output_stats),
        "mode": model.mode,
    }
    if data is not None:
        body["data"] = {"theta": data.theta.tolist(), "y": data.y.tolist(),
                        "input_names": list(data.input_names), "output_names": list(data.output_names)}
    if meta:
        body["meta"] = meta
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(f"{MAGIC} {FORMAT_VERSION[0]}.{FORMAT_VERSION[1]}\n")
        json.dump(body, fh, sort_keys=True, indent=1)
        fh.write("\n")


def read_model_meta(path) -> dict:
    """The ``meta`` mapping stored by :func:`save_model` (empty if absent)."""
    with open(path, "rb") as fh:
        fh.readline()
        try:
            body = json.loads(fh.read())
        except ValueError as exc:
            raise FormatError(f"{path}: corrupt model body: {exc}") from None
    return dict(body.get("meta", {}))


def load_model(path, with_data=False):
    """Read a file written by :func:`save_model`.

    Older minor versions load with defaults for fields they lack (and a
    warning). Returns the model, or ``(model, data_or_None)`` if
    ``with_data``.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"file not found: {path}")
    with open(path, "rb") as fh:
        head = fh.readline(64).decode("ascii", errors="replace").strip()
        rest = fh.read()
    parts = head.split()
    if len(parts) != 2 or parts[0] != MAGIC:
        raise FormatError(f"{path}: not a dlgp model file (bad header {head[:20]!r})")
    try:
        major, minor = (int(v) for v in parts[1].split("."))
    except ValueError:
        raise FormatError(f"{path}: unreadable version {parts[1]!r}") from None
    if major != FORMAT_VERSION[0] or minor > FORMAT_VERSION[1]:
        raise FormatError(f"{path}: format version {major}.{minor} not supported "
                          f"(reader is {FORMAT_VERSION[0]}.{FORMAT_VERSION[1]})")
    try:
        body = json.loads(rest)
    except ValueError as exc:
        raise FormatError(f"{path}: corrupt model body: {exc}") from None
    for key, default in _OPTIONAL_FIELDS.items():
        if key not in body:
            warnings.warn(f"{path}: field {key!r} absent (version {major}.{minor}); using {default!r}",
                          stacklevel=2)
            body[key] = default
    try:
        layers = [net.Layer(np.array(l["weight"], dtype=float).reshape(len(l["bias"]), -1),
                            np.array(l["bias"], dtype=float), net.Activation(l["activation"]))
                  for l in body["layers"]]
        model = DlgpModel(
            net.NetworkParams(layers),
            np.array(body["mixture"], dtype=float),
            np.array(body["bias"], dtype=float),
            np.array(body["noise_sd"], dtype=float),
            [KernelHyper(k["lengthscale"], k["nugget"]) for k in body["kernels"]],
            _stats_from(body["input_stats"]),
            _stats_from(body["output_stats"]),
            body["mode"],
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: corrupt model body: {exc}") from None
    if not with_data:
        return model
    data = None
    if "data" in body:
        dd = body["data"]
        data = TrainingDataset(np.array(dd["theta"], dtype=float).reshape(-1, model.d),
                               np.array(dd["y"], dtype=float).reshape(-1, model.p),
                               input_stats=model.input_stats, output_stats=model.output_stats,
                               input_names=dd.get("input_names"), output_names=dd.get("output_names"))
    return model, data
