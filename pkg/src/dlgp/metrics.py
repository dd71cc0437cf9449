"""NMSE, NLPD, interval coverage and the random-split benchmark harness."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .data_io import TrainingDataset, write_csv
from .errors import BenchmarkError, DomainError, InputError, MetricError

log = logging.getLogger(__name__)

LOG_2PI = math.log(2 * math.pi)

# Published motorcycle results (300 random 90/10 splits), for report footnotes.
PUBLISHED_MOTORCYCLE = {
    "DL-GP": {"nmse": (0.20, 0.07), "nlpd": (0.68, 0.18)},
    "Q-DL": {"nmse": (0.31, 0.21), "nlpd": None},
    "WHGP": {"nmse": (0.28, 0.21), "nlpd": (4.26, 0.31)},
    "GP": {"nmse": (0.26, 0.18), "nlpd": (4.59, 0.22)},
    "MAPHGP": {"nmse": (0.26, 0.17), "nlpd": (4.32, 0.60)},
    "VHGP": {"nmse": (0.26, 0.17), "nlpd": (4.32, 0.30)},
}


def nmse(y_test, y_hat, y_train_mean):
    """Squared error normalized by squared deviation from the training mean."""
    y_test = np.asarray(y_test, dtype=float).reshape(-1)
    y_hat = np.asarray(y_hat, dtype=float).reshape(-1)
    if y_test.shape != y_hat.shape:
        raise InputError("y_test and y_hat differ in length")
    den = float(np.sum((y_test - y_train_mean) ** 2))
    if den == 0.0:
        raise MetricError("NMSE undefined: every test target equals the training mean")
    return float(np.sum((y_test - y_hat) ** 2)) / den


def nlpd(y_test, pred_means, pred_vars):
    """Mean negative Gaussian log predictive density."""
    y = np.asarray(y_test, dtype=float).reshape(-1)
    mu = np.asarray(pred_means, dtype=float).reshape(-1)
    var = np.asarray(pred_vars, dtype=float).reshape(-1)
    if np.any(~(var > 0)):
        raise DomainError("predictive variances must be positive")
    return float(np.mean(0.5 * (LOG_2PI + np.log(var) + (y - mu) ** 2 / var)))


def interval_coverage(y_test, lo, hi):
    """Fraction of ``y_test`` inside ``[lo, hi]`` (inclusive)."""
    y = np.asarray(y_test, dtype=float).reshape(-1)
    lo = np.asarray(lo, dtype=float).reshape(-1)
    hi = np.asarray(hi, dtype=float).reshape(-1)
    if np.any(lo > hi):
        raise InputError("interval with lo > hi")
    if y.size == 0:
        return float("nan")
    return float(np.mean((y >= lo) & (y <= hi)))


@dataclass
class SplitPlan:
    splits: list
    fraction: float
    seed: int

    def __len__(self):
        return len(self.splits)

    def __iter__(self):
        return iter(self.splits)


def make_splits(n, fraction, n_splits, seed) -> SplitPlan:
    """Independent uniform random train/test partitions.

    Each training set has ``round(fraction * n)`` rows.
    """
    if not 0 < fraction < 1:
        raise InputError(f"fraction must lie in (0, 1), got {fraction}")
    if n < 2:
        raise InputError("need at least two rows to split")
    n_train = int(round(fraction * n))
    if n_train >= n or n_train < 1:
        raise InputError(f"n={n} with fraction={fraction} leaves an empty train or test set")
    rng = np.random.default_rng(seed)
    splits = []
    for _ in range(n_splits):
        perm = rng.permutation(n)
        splits.append((np.sort(perm[:n_train]), np.sort(perm[n_train:])))
    return SplitPlan(splits, fraction, seed)


# ---------------------------------------------------------------------------
# benchmark
# ---------------------------------------------------------------------------

@dataclass
class AdapterPrediction:
    """Predictions for ``M`` rows and ``p`` outputs; ``var`` is None without a density."""

    mean: np.ndarray
    var: np.ndarray | None
    lo: np.ndarray
    hi: np.ndarray


@dataclass
class SplitResult:
    model: str
    split_id: int
    nmse: float = float("nan")
    nlpd: float = float("nan")
    nlpd_std: float = float("nan")
    coverage90: float = float("nan")
    error: str = ""


def score_split(train: TrainingDataset, test: TrainingDataset, pred: AdapterPrediction, model, split_id):
    """Metrics per output dimension, then averaged over outputs.

    ``nlpd`` is in original units; ``nlpd_std`` rescales targets and
    predictions by the training split's output standard deviation.
    """
    ybar = train.y.mean(axis=0)
    sd = train.y.std(axis=0)
    sd = np.where(sd > 0, sd, 1.0)
    p = test.p
    nm = np.mean([nmse(test.y[:, i], pred.mean[:, i], ybar[i]) for i in range(p)])
    cov = np.mean([interval_coverage(test.y[:, i], pred.lo[:, i], pred.hi[:, i]) for i in range(p)])
    res = SplitResult(model, split_id, nmse=float(nm), coverage90=float(cov))
    if pred.var is not None:
        res.nlpd = float(np.mean([nlpd(test.y[:, i], pred.mean[:, i], pred.var[:, i]) for i in range(p)]))
        res.nlpd_std = float(np.mean([
            nlpd((test.y[:, i] - ybar[i]) / sd[i], (pred.mean[:, i] - ybar[i]) / sd[i], pred.var[:, i] / sd[i] ** 2)
            for i in range(p)
        ]))
    return res


@dataclass
class BenchmarkReport:
    results: list = field(default_factory=list)

    def models(self):
        seen = []
        for r in self.results:
            if r.model not in seen:
                seen.append(r.model)
        return seen

    def per_model(self, name):
        return [r for r in self.results if r.model == name and not r.error]

    def summary(self):
        """Mean and sample sd of each metric per model, with failure counts."""
        out = {}
        for name in self.models():
            rows = self.per_model(name)
            stats = {}
            for key in ("nmse", "nlpd", "nlpd_std", "coverage90"):
                vals = np.array([getattr(r, key) for r in rows], dtype=float)
                vals = vals[np.isfinite(vals)]
                if vals.size == 0:
                    stats[key] = (float("nan"), float("nan"))
                else:
                    stats[key] = (float(vals.mean()), float(vals.std(ddof=1)) if vals.size > 1 else 0.0)
            stats["failures"] = sum(1 for r in self.results if r.model == name and r.error)
            out[name] = stats
        return out

    def write_csv(self, path, published=None):
        """Per-split rows, then ``mean``/``sd`` rows per model, then optional published footnotes."""
        header = ["model", "split_id", "nmse", "nlpd", "coverage90", "nlpd_std", "error"]
        rows = [[r.model, r.split_id, r.nmse, r.nlpd, r.coverage90, r.nlpd_std, r.error] for r in self.results]
        for name, st in self.summary().items():
            for label, k in (("mean", 0), ("sd", 1)):
                rows.append([name, label, st["nmse"][k], st["nlpd"][k], st["coverage90"][k],
                             st["nlpd_std"][k], ""])
        for name, vals in (published or {}).items():
            for label, k in (("published_mean", 0), ("published_sd", 1)):
                nl = "" if vals["nlpd"] is None else vals["nlpd"][k]
                rows.append([name, label, vals["nmse"][k], nl, "", "", ""])
        write_csv(path, header, rows)

    def table(self, published=None):
        def fmt(pair):
            m, s = pair
            return "N/A" if not math.isfinite(m) else f"{m:.3f} +/- {s:.3f}"

        lines = [f"{'model':<10} {'NMSE':>18} {'NLPD':>18} {'NLPD (std)':>18} {'cov90':>7} {'fail':>5}"]
        for name, st in self.summary().items():
            cov = st["coverage90"][0]
            lines.append(f"{name:<10} {fmt(st['nmse']):>18} {fmt(st['nlpd']):>18} "
                         f"{fmt(st['nlpd_std']):>18} {cov:>7.3f} {st['failures']:>5d}")
        if published:
            lines.append("")
            lines.append("published reference values (300 splits):")
            for name, vals in published.items():
                nl = "N/A" if vals["nlpd"] is None else f"{vals['nlpd'][0]:.2f} +/- {vals['nlpd'][1]:.2f}"
                lines.append(f"  {name:<8} NMSE {vals['nmse'][0]:.2f} +/- {vals['nmse'][1]:.2f}   NLPD {nl}")
        return "\n".join(lines)


def benchmark(adapters, data: TrainingDataset, plan: SplitPlan, max_failure_rate=0.10) -> BenchmarkReport:
    """Fit and score each adapter factory on every split.

    ``adapters`` maps a display name to a zero-argument factory returning a
    fresh adapter with ``fit(train, split_id)`` and ``predict(theta)``.
    A failing split is recorded with its error message; if a model fails on
    at least ``max_failure_rate`` of splits, :class:`BenchmarkError` is raised.
    """
    report = BenchmarkReport()
    for name, factory in adapters.items():
        failures = 0
        for sid, (tr, te) in enumerate(plan):
            train, test = data.subset(tr), data.subset(te, refit=False)
            try:
                adapter = factory()
                adapter.fit(train, sid)
                res = score_split(train, test, adapter.predict(test.theta), name, sid)
            except Exception as exc:  # recorded per split
                failures += 1
                log.warning("%s failed on split %d (plan seed %d): %s", name, sid, plan.seed, exc)
                res = SplitResult(name, sid, error=f"{type(exc).__name__}: {exc}")
            report.results.append(res)
        if len(plan) and failures / len(plan) >= max_failure_rate:
            err = BenchmarkError(f"{name} failed on {failures} of {len(plan)} splits")
            err.report = report
            raise err
    return report
