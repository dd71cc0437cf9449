"""Quantile kriging preprocessing and the quantile deep-learner baseline."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import net
from .data_io import TrainingDataset, write_csv
from .errors import ConfigError, DomainError, InputError, TrainingError

MOTORCYCLE_QUANTILES = (0.05, 0.20, 0.5, 0.80, 0.95)
TRAJECTORY_QUANTILES = (0.05, 0.275, 0.5, 0.725, 0.95)


def check_levels(qs):
    qs = np.asarray(qs, dtype=float).reshape(-1)
    if qs.size == 0 or np.any(qs <= 0) or np.any(qs >= 1) or np.any(np.diff(qs) <= 0):
        raise ConfigError(f"quantile levels must be strictly increasing in (0, 1), got {qs.tolist()}")
    return qs


def empirical_quantiles(replicates, qs):
    """Per-column quantiles by linear interpolation of order statistics.

    This is the ``type 7`` estimator (numpy's ``linear`` method): for ``n``
    sorted values the ``q`` quantile sits at position ``(n - 1) q``.
    """
    replicates = np.asarray(replicates, dtype=float)
    if replicates.ndim == 1:
        replicates = replicates[:, None]
    if replicates.shape[0] == 0:
        raise InputError("no replicates")
    qs = check_levels(qs)
    out = np.quantile(replicates, qs, axis=0, method="linear")
    # guard against rounding making adjacent rows cross
    return np.maximum.accumulate(out, axis=0)


@dataclass
class QuantileDesign:
    """Rows of ``(theta, alpha, trajectory)``; ``scenario_id`` tags the source design."""

    theta: np.ndarray
    alpha: np.ndarray
    trajectories: np.ndarray
    scenario_id: np.ndarray

    def __len__(self):
        return self.theta.shape[0]

    def inputs(self):
        return np.column_stack([self.theta, self.alpha])

    def to_dataset(self, transform=None) -> TrainingDataset:
        y = self.trajectories if transform is None else transform(self.trajectories)
        d = self.theta.shape[1]
        return TrainingDataset(self.inputs(), y,
                               input_names=[f"theta_{i + 1}" for i in range(d)] + ["alpha"],
                               output_names=[f"t_{t}" for t in range(y.shape[1])])

    def select(self, mask):
        mask = np.asarray(mask)
        return QuantileDesign(self.theta[mask], self.alpha[mask], self.trajectories[mask], self.scenario_id[mask])


def augment_with_alpha(designs, quantile_trajs, qs, scenario_ids=None) -> QuantileDesign:
    """Expand ``m`` designs with ``k`` quantile trajectories into ``m * k`` rows.

    ``quantile_trajs`` has shape ``(m, k, T)``. Duplicate design rows are kept;
    a warning flags the resulting repeated ``(theta, alpha)`` pairs.
    """
    designs = np.asarray(designs, dtype=float)
    qs = check_levels(qs)
    trajs = np.asarray(quantile_trajs, dtype=float)
    m = designs.shape[0]
    if m == 0:
        d = designs.shape[1] if designs.ndim == 2 else 0
        T = trajs.shape[2] if trajs.ndim == 3 else 0
        return QuantileDesign(np.zeros((0, d)), np.zeros(0), np.zeros((0, T)), np.zeros(0, dtype=np.int64))
    if trajs.ndim != 3 or trajs.shape[0] != m or trajs.shape[1] != qs.size:
        raise InputError(f"quantile trajectories have shape {trajs.shape}, expected ({m}, {qs.size}, T)")
    if scenario_ids is None:
        scenario_ids = np.arange(m)
    k = qs.size
    theta = np.repeat(designs, k, axis=0)
    alpha = np.tile(qs, m)
    if np.unique(np.column_stack([theta, alpha]), axis=0).shape[0] != m * k:
        warnings.warn("design contains repeated (theta, alpha) pairs", stacklevel=2)
    return QuantileDesign(theta, alpha, trajs.reshape(m * k, -1), np.repeat(np.asarray(scenario_ids), k))


def quantile_design_from_replicates(table, qs) -> QuantileDesign:
    sids = np.unique(table.scenario_id)
    thetas, trajs = [], []
    for sid in sids:
        theta, reps = table.scenario(sid)
        thetas.append(theta)
        trajs.append(empirical_quantiles(reps, qs))
    return augment_with_alpha(np.array(thetas), np.array(trajs), qs, sids)


def write_quantile_csv(path, design: QuantileDesign):
    d = design.theta.shape[1]
    T = design.trajectories.shape[1]
    header = ["scenario_id"] + [f"theta_{i + 1}" for i in range(d)] + ["alpha"] + [f"t_{t}" for t in range(T)]
    rows = ([int(s)] + [float(v) for v in th] + [float(a)] + [float(v) for v in tr]
            for s, th, a, tr in zip(design.scenario_id, design.theta, design.alpha, design.trajectories))
    write_csv(path, header, rows)


def read_quantile_csv(path) -> QuantileDesign:
    from .data_io import read_numeric_csv

    header, data = read_numeric_csv(path)
    th = [i for i, h in enumerate(header) if h.startswith("theta_")]
    tt = [i for i, h in enumerate(header) if h.startswith("t_")]
    if "alpha" not in header or not th or not tt:
        raise InputError(f"{path}: quantile design needs theta_*, alpha and t_* columns")
    sid = data[:, header.index("scenario_id")].astype(np.int64) if "scenario_id" in header \
        else np.arange(data.shape[0])
    return QuantileDesign(data[:, th], data[:, header.index("alpha")], data[:, tt], sid)


# ---------------------------------------------------------------------------
# quantile deep learner
# ---------------------------------------------------------------------------

def pinball_mse_loss(y, y_hat, q):
    """Squared error plus the pinball loss ``max(q (y_hat - y), (q - 1)(y_hat - y))``.

    Note the error is ``y_hat - y``: the pinball part alone is minimized by
    the empirical ``1 - q`` quantile. With symmetric level sets the sorted
    heads still span the intended band.
    """
    if not 0 < q < 1:
        raise DomainError(f"quantile level must lie in (0, 1), got {q}")
    e = np.asarray(y_hat, dtype=float) - np.asarray(y, dtype=float)
    out = e * e + np.maximum(q * e, (q - 1.0) * e)
    return float(out) if np.ndim(out) == 0 else out


def _pinball_mse_grad(y, y_hat, qs):
    e = y_hat - y
    return 2.0 * e + np.where(e > 0, qs, qs - 1.0)


@dataclass
class QuantileNetConfig:
    learning_rate: float = 0.05
    n_steps: int = 3000
    seed: int = 0


@dataclass
class QuantileNet:
    network: net.NetworkParams
    levels: np.ndarray
    input_stats: object
    output_stats: object

    def predict(self, theta, fix_crossing=True):
        """Head outputs in original units, shape ``(M, len(levels))``."""
        z, _ = net.forward(self.network, self.input_stats.apply(np.atleast_2d(theta)))
        out = z * self.output_stats.sd[0] + self.output_stats.mean[0]
        return np.sort(out, axis=1) if fix_crossing else out

    def interval(self, theta, lo_level=0.05, hi_level=0.95):
        """Band between two heads (the 0.05 and 0.95 heads give a 90% interval)."""
        pred = self.predict(theta)
        lo = pred[:, int(np.argmin(np.abs(self.levels - lo_level)))]
        hi = pred[:, int(np.argmin(np.abs(self.levels - hi_level)))]
        return lo, hi


def train_quantile_dl(data: TrainingDataset, qs, net_specs, config: QuantileNetConfig) -> QuantileNet:
    """Full-batch gradient descent of the mean pinball-plus-MSE loss over all heads.

    The last layer must have one unit per quantile level. Only the first
    output column of ``data`` is modelled.
    """
    qs = check_levels(qs)
    specs = [s if isinstance(s, net.LayerSpec) else net.LayerSpec(*s) for s in net_specs]
    if specs[-1].output_width != qs.size:
        raise ConfigError(f"last layer has {specs[-1].output_width} units, need {qs.size} heads")
    params = net.init_network(specs, config.seed)
    x = data.input_stats.apply(data.theta)
    y = data.output_stats.apply(data.y)[:, :1]
    n = x.shape[0]
    for step in range(config.n_steps):
        out, cache = net.forward(params, x)
        g = _pinball_mse_grad(y, out, qs[None, :]) / (n * qs.size)
        grads, _ = net.backward(params, cache, g)
        vec = params.to_vector() - config.learning_rate * net.grads_to_vector(grads)
        if not np.all(np.isfinite(vec)):
            raise TrainingError(f"quantile network diverged at step {step}", step)
        params = params.from_vector(vec)
    return QuantileNet(params, qs, data.input_stats, data.output_stats)


def quantile_crossing_fix(preds):
    """Monotone rearrangement: sort head outputs ascending."""
    return np.sort(np.asarray(preds, dtype=float), axis=-1)


def mean_pinball_mse(y, preds, qs):
    y = np.asarray(y, dtype=float).reshape(-1, 1)
    return float(np.mean([pinball_mse_loss(y[:, 0], preds[:, k], q) for k, q in enumerate(qs)]))

