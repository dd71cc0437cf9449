"""Command-line entry point: ``dlgp <verb> [options]``.

Verbs
-----
simulate              symmetric LHS design plus replicate trajectories
prep-quantiles        replicate CSV -> quantile design CSV
train                 fit a DL-GP, write the model file and likelihood trace
predict               posterior means and intervals for a query CSV
evaluate              score a trained model on held-out scenarios or test data
benchmark-motorcycle  random-split comparison on the motorcycle data

Every verb accepts ``--config FILE`` (INI; see :data:`CONFIG_SCHEMA`) and
the flags override matching config keys. Exit status is 0 on success, 2 for
user or configuration errors and 1 for internal failures; diagnostics go to
stderr.
"""
from __future__ import annotations

import argparse
import configparser
import logging
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import adapters, data_io, metrics, net, quantile
from . import model as dl
from .errors import (BenchmarkError, ConfigError, DomainError, FormatError, InputError, MetricError,
                     NumericalError, TrainingError)
from .sampler import SliceConfig

log = logging.getLogger("dlgp")

# section -> {key: default}; values are strings exactly as they would appear in the file
CONFIG_SCHEMA = {
    "data": {"motorcycle": "", "replicates": "", "design": "", "quantiles": "", "train": "", "test": "",
             "query": ""},
    "simulate": {"m": "20", "n_replicates": "50", "horizon_weeks": "56", "scenario_spec": "", "seed": "0"},
    "quantiles": {"levels": "0.05, 0.275, 0.5, 0.725, 0.95", "holdout_scenarios": "",
                  "output_transform": "none"},
    "network": {"layers": "16:tanh, 2:identity", "q": ""},
    "train": {"learning_rate": "0.01", "n_steps": "500", "slice_interval": "25", "slice_width": "1.0",
              "max_stepouts": "10", "noise_sd": "0.3", "lengthscale": "1.0", "nugget": "0.001",
              "mode": "full", "seed": "0"},
    "benchmark": {"n_splits": "30", "fraction": "0.9", "models": "dlgp, gp, qdl", "seed": "0",
                  "max_failure_rate": "0.10"},
    "output": {"dir": "out", "level": "0.90"},
}

PIPELINE_FILES = ("replicates", "design", "quantiles")

TRANSFORMS = {
    "none": (lambda y: y, lambda y: y),
    "log1p": (np.log1p, np.expm1),
}


@dataclass
class ExperimentConfig:
    values: dict
    explicit: set = field(default_factory=set)
    base: Path = Path(".")

    def get(self, section, key):
        return self.values[section][key]

    def path(self, section, key):
        """Resolved path; pipeline files default to ``<output dir>/<key>.csv``."""
        raw = self.get(section, key)
        if not raw and section == "data" and key in PIPELINE_FILES:
            return self.out_path(f"{key}.csv")
        return None if not raw else self.resolve(raw)

    def resolve(self, raw):
        p = Path(raw).expanduser()
        return p if p.is_absolute() else self.base / p

    def out_path(self, name):
        return self.resolve(self.get("output", "dir")) / name

    def number(self, section, key, kind=float):
        raw = self.get(section, key)
        try:
            return kind(raw)
        except ValueError:
            raise ConfigError(f"[{section}] {key} = {raw!r} is not a valid {kind.__name__}") from None

    def ints(self, section, key):
        raw = self.get(section, key)
        try:
            return [int(v) for v in raw.replace(",", " ").split()]
        except ValueError:
            raise ConfigError(f"[{section}] {key} must be a list of integers, got {raw!r}") from None

    def levels(self):
        raw = self.get("quantiles", "levels")
        try:
            qs = [float(v) for v in raw.replace(",", " ").split()]
        except ValueError:
            raise ConfigError(f"[quantiles] levels must be numbers, got {raw!r}") from None
        return quantile.check_levels(qs)

    def transform(self):
        name = self.get("quantiles", "output_transform").strip().lower()
        if name not in TRANSFORMS:
            raise ConfigError(f"[quantiles] output_transform must be one of {sorted(TRANSFORMS)}, got {name!r}")
        return name

    def layer_specs(self, d):
        specs = net.parse_layers(self.get("network", "layers"), d)
        q_raw = self.get("network", "q")
        if q_raw:
            q = self.number("network", "q", int)
            if q < 1:
                raise ConfigError("[network] q must be >= 1")
            if q != specs[-1].output_width:
                raise ConfigError(f"[network] q = {q} but the final layer has width {specs[-1].output_width}")
        return specs

    def train_config(self, seed=None) -> dl.TrainConfig:
        return dl.TrainConfig(
            learning_rate=self.number("train", "learning_rate"),
            n_steps=self.number("train", "n_steps", int),
            slice_interval=self.number("train", "slice_interval", int),
            slice_config=SliceConfig(self.number("train", "slice_width"),
                                     self.number("train", "max_stepouts", int)),
            seed=self.number("train", "seed", int) if seed is None else seed,
        )


def load_config(path=None, overrides=None) -> ExperimentConfig:
    """Merge defaults, the optional INI file and ``{(section, key): value}`` overrides.

    Unknown sections or keys are configuration errors, which catches typos.
    """
    values = {sec: dict(keys) for sec, keys in CONFIG_SCHEMA.items()}
    explicit = set()
    base = Path(".")
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"file not found: {path}")
        cp = configparser.ConfigParser(interpolation=None)
        try:
            cp.read(path)
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from None
        for sec in cp.sections():
            if sec not in CONFIG_SCHEMA:
                raise ConfigError(f"{path}: unknown section [{sec}]")
            for key, val in cp[sec].items():
                if key not in CONFIG_SCHEMA[sec]:
                    raise ConfigError(f"{path}: unknown key {key!r} in [{sec}]")
                values[sec][key] = val.strip()
                explicit.add((sec, key))
        base = path.parent
    for (sec, key), val in (overrides or {}).items():
        if val is not None:
            values[sec][key] = str(val)
            explicit.add((sec, key))
    return ExperimentConfig(values, explicit, base)


def _require(path, what):
    if path is None:
        raise ConfigError(f"no {what} given (set it in the config or on the command line)")
    if not Path(path).exists():
        raise FileNotFoundError(f"file not found: {path}")
    return Path(path)


def _out(args, cfg, default_name):
    return Path(args.out) if args.out else cfg.out_path(default_name)


def _say(msg):
    print(msg, file=sys.stdout)


# ---------------------------------------------------------------------------
# verbs
# ---------------------------------------------------------------------------

def cmd_simulate(args, cfg: ExperimentConfig):
    spec_file = cfg.path("simulate", "scenario_spec")
    spec = data_io.load_scenario_spec(_require(spec_file, "scenario spec")) if spec_file \
        else data_io.ScenarioSpec.epidemic_default()
    m = cfg.number("simulate", "m", int)
    n_rep = cfg.number("simulate", "n_replicates", int)
    horizon = cfg.number("simulate", "horizon_weeks", int)
    seed = cfg.number("simulate", "seed", int)
    design = data_io.symmetric_lhs(m, spec, seed)
    table = data_io.simulate_design(design, n_rep, horizon, seed + 1, spec)
    out = Path(args.out) if args.out else cfg.path("data", "replicates")
    data_io.write_replicates_csv(out, table)
    design_out = out.with_name(out.stem + "_design.csv") if args.out else cfg.path("data", "design")
    data_io.write_csv(design_out, list(spec.names), [[float(v) for v in row] for row in design])
    _say(f"wrote {len(table.scenario_id)} trajectories ({m} scenarios x {n_rep} replicates, "
         f"T={horizon}) to {out}")
    return 0


def cmd_prep_quantiles(args, cfg: ExperimentConfig):
    src = _require(Path(args.replicates) if args.replicates else cfg.path("data", "replicates"), "replicate CSV")
    qs = cfg.levels()
    table = data_io.read_replicates_csv(src)
    design = quantile.quantile_design_from_replicates(table, qs)
    out = Path(args.out) if args.out else cfg.path("data", "quantiles")
    quantile.write_quantile_csv(out, design)
    m = len(np.unique(table.scenario_id))
    _say(f"wrote {len(design)} rows ({m} scenarios x {qs.size} quantiles) to {out}")
    return 0


def _training_data(cfg: ExperimentConfig):
    """Training set and the transform name; quantile designs drop holdout scenarios."""
    transform = cfg.transform()
    fwd = TRANSFORMS[transform][0]
    xy = cfg.path("data", "train")
    if xy is not None:
        data = data_io.load_xy_csv(_require(xy, "training CSV"))
        if transform != "none":
            data = data_io.TrainingDataset(data.theta, fwd(data.y), input_names=data.input_names,
                                           output_names=data.output_names)
        return data, transform
    design = quantile.read_quantile_csv(_require(cfg.path("data", "quantiles"), "quantile CSV"))
    holdout = cfg.ints("quantiles", "holdout_scenarios")
    unknown = sorted(set(holdout) - set(design.scenario_id.tolist()))
    if unknown:
        raise ConfigError(f"holdout scenarios {unknown} not present in the quantile design")
    keep = ~np.isin(design.scenario_id, holdout)
    if not np.any(keep):
        raise ConfigError("every scenario is held out; nothing left to train on")
    return design.select(keep).to_dataset(fwd if transform != "none" else None), transform


def cmd_train(args, cfg: ExperimentConfig):
    data, transform = _training_data(cfg)
    specs = cfg.layer_specs(data.d)
    tc = cfg.train_config(args.seed)
    model = dl.init_model(data, specs, seed=tc.seed, noise_sd=cfg.number("train", "noise_sd"),
                          lengthscale=cfg.number("train", "lengthscale"), nugget=cfg.number("train", "nugget"),
                          mode=cfg.get("train", "mode"))
    out_dir = Path(args.out) if args.out else cfg.resolve(cfg.get("output", "dir"))
    trace_path = out_dir / "trace.csv"
    try:
        fitted, trace = dl.train(model, data, tc)
    except TrainingError as exc:
        if exc.trace is not None:
            data_io.write_csv(trace_path, ["step", "log_likelihood"],
                              [[i, float(v)] for i, v in enumerate(exc.trace)])
            print(f"partial trace ({len(exc.trace)} steps) kept in {trace_path}", file=sys.stderr)
        raise
    data_io.write_csv(trace_path, ["step", "log_likelihood"], [[i, float(v)] for i, v in enumerate(trace)])
    model_path = out_dir / "model.dlgp"
    dl.save_model(fitted, model_path, data, meta={"output_transform": transform})
    _, flat = dl.feature_diagnostics(fitted, data)
    for j in np.flatnonzero(flat):
        print(f"note: latent feature {j + 1} is nearly constant over the training inputs", file=sys.stderr)
    final = dl.dlgp_log_marginal(fitted, data)
    _say(f"trained on N={data.n}, d={data.d}, p={data.p}, q={fitted.q}; "
         f"final log-likelihood {final:.6f}; model written to {model_path}")
    return 0


def _prediction_table(model_path, query, level):
    model, data = dl.load_model(model_path, with_data=True)
    transform = dl.read_model_meta(model_path).get("output_transform", "none")
    if transform not in TRANSFORMS:
        raise FormatError(f"{model_path}: unknown output transform {transform!r}")
    mean, cov = dl.predict_arrays(model, data, query)
    z = dl.z_value(level)
    sd = np.sqrt(np.maximum(np.diagonal(cov, axis1=1, axis2=2), 0.0))
    inv = TRANSFORMS[transform][1]
    # the transform is monotone, so interval endpoints map directly
    return inv(mean), inv(mean - z * sd), inv(mean + z * sd), cov, model


def cmd_predict(args, cfg: ExperimentConfig):
    model_path = _require(Path(args.model), "model file")
    query_path = _require(Path(args.query) if args.query else cfg.path("data", "query"), "query CSV")
    level = float(args.level) if args.level is not None else cfg.number("output", "level")
    model = dl.load_model(model_path)
    query = data_io.load_query_csv(query_path, model.d)
    mean, lo, hi, cov, model = _prediction_table(model_path, query, level)
    p = model.p
    header = [f"y_{i + 1}_{kind}" for i in range(p) for kind in ("mean", "lo", "hi")]
    rows = [[float(v) for i in range(p) for v in (mean[m, i], lo[m, i], hi[m, i])] for m in range(len(query))]
    out = _out(args, cfg, "predictions.csv")
    data_io.write_csv(out, header, rows)
    if args.dump_cov:
        data_io.write_csv(args.dump_cov, ["query", "i", "j", "cov"],
                          [[m, i + 1, j + 1, float(cov[m, i, j])]
                           for m in range(len(query)) for i in range(p) for j in range(p)])
    _say(f"wrote {len(query)} predictions ({p} outputs, level {level}) to {out}")
    return 0


def cmd_evaluate(args, cfg: ExperimentConfig):
    """Band coverage of held-out quantile trajectories, or metrics on a test xy CSV."""
    model_path = _require(Path(args.model) if args.model else cfg.out_path("model.dlgp"), "model file")
    level = float(args.level) if args.level is not None else cfg.number("output", "level")
    out = _out(args, cfg, "evaluation.csv")
    holdout = cfg.ints("quantiles", "holdout_scenarios")
    test_path = cfg.path("data", "test")
    if holdout:
        design = quantile.read_quantile_csv(_require(cfg.path("data", "quantiles"), "quantile CSV"))
        mask = np.isin(design.scenario_id, holdout)
        if not np.any(mask):
            raise ConfigError(f"holdout scenarios {holdout} not present in the quantile design")
        held = design.select(mask)
        _, lo, hi, _, _ = _prediction_table(model_path, held.inputs(), level)
        inside = (held.trajectories >= lo) & (held.trajectories <= hi)
        cover = inside.mean(axis=1)
        rows = [[int(s), float(a), float(c)] for s, a, c in zip(held.scenario_id, held.alpha, cover)]
        data_io.write_csv(out, ["scenario_id", "alpha", "band_coverage"], rows)
        _say(f"held-out trajectories: {len(rows)}; band coverage min {cover.min():.3f}, mean {cover.mean():.3f}")
        return 0
    test = data_io.load_xy_csv(_require(test_path, "test CSV or holdout scenarios"))
    model, train = dl.load_model(model_path, with_data=True)
    if train is None:
        raise FormatError(f"{model_path}: model file carries no training data")
    transform = dl.read_model_meta(model_path).get("output_transform", "none")
    if transform != "none":
        raise ConfigError("test-set metrics are computed on untransformed outputs; retrain without a transform")
    mean, cov = dl.predict_arrays(model, train, test.theta)
    var = np.maximum(np.diagonal(cov, axis1=1, axis2=2), 1e-300)
    z = dl.z_value(level)
    pred = metrics.AdapterPrediction(mean, var, mean - z * np.sqrt(var), mean + z * np.sqrt(var))
    res = metrics.score_split(train, test, pred, "dlgp", 0)
    data_io.write_csv(out, ["nmse", "nlpd", "nlpd_std", "coverage"],
                      [[res.nmse, res.nlpd, res.nlpd_std, res.coverage90]])
    _say(f"NMSE {res.nmse:.4f}  NLPD {res.nlpd:.4f}  NLPD(std) {res.nlpd_std:.4f}  coverage {res.coverage90:.3f}")
    return 0


def _dlgp_settings(cfg: ExperimentConfig) -> adapters.DlgpSettings:
    """Adapter defaults, overridden only by keys the config sets explicitly."""
    st = adapters.DlgpSettings()
    if ("network", "layers") in cfg.explicit:
        st.layers = cfg.get("network", "layers")
    casts = {"learning_rate": float, "n_steps": int, "slice_interval": int, "slice_width": float,
             "noise_sd": float, "lengthscale": float, "nugget": float, "mode": str, "seed": int}
    for key, kind in casts.items():
        if ("train", key) in cfg.explicit:
            setattr(st, key, cfg.number("train", key, kind) if kind is not str else cfg.get("train", key))
    return st


def cmd_benchmark(args, cfg: ExperimentConfig):
    path = cfg.path("data", "motorcycle")
    data = data_io.load_motorcycle(_require(path, "motorcycle CSV") if path else None)
    names = [m.strip() for m in cfg.get("benchmark", "models").split(",") if m.strip()]
    bad = [m for m in names if m not in ("dlgp", "gp", "qdl", "mean")]
    if bad or not names:
        raise ConfigError(f"unknown models {bad}; choose from dlgp, gp, qdl, mean")
    st = _dlgp_settings(cfg)
    factories = {
        "dlgp": lambda: adapters.DlgpAdapter(st),
        "gp": adapters.GpAdapter,
        "qdl": adapters.QdlAdapter,
        "mean": adapters.MeanAdapter,
    }
    plan = metrics.make_splits(data.n, cfg.number("benchmark", "fraction"),
                               cfg.number("benchmark", "n_splits", int), cfg.number("benchmark", "seed", int))
    out_dir = Path(args.out) if args.out else cfg.resolve(cfg.get("output", "dir"))
    try:
        report = metrics.benchmark({n: factories[n] for n in names}, data, plan,
                                   cfg.number("benchmark", "max_failure_rate"))
    except BenchmarkError as exc:
        exc.report.write_csv(out_dir / "benchmark.csv")
        raise
    published = {k: v for k, v in metrics.PUBLISHED_MOTORCYCLE.items() if k in ("DL-GP", "GP", "Q-DL")}
    report.write_csv(out_dir / "benchmark.csv", published)
    table = report.table(published)
    (out_dir / "benchmark.txt").write_text(table + "\n")
    _say(table)
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI experiment config")
    common.add_argument("--seed", type=int, help="override the seed used by this command")
    common.add_argument("--out", help="output file (or directory for train/benchmark)")

    parser = argparse.ArgumentParser(prog="dlgp", description="Deep-learning Gaussian process surrogates.")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("simulate", parents=[common], help="simulate replicate trajectories on a symmetric LHS")
    p.add_argument("--spec", help="scenario spec INI with a [parameters] section")
    p.add_argument("--m", type=int, help="number of scenarios (even)")
    p.add_argument("--replicates", type=int, help="replicates per scenario")
    p.add_argument("--horizon", type=int, help="weeks per trajectory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("prep-quantiles", parents=[common], help="replicates -> quantile design")
    p.add_argument("replicates", nargs="?", help="replicate CSV")
    p.add_argument("--levels", help="comma-separated quantile levels")
    p.set_defaults(func=cmd_prep_quantiles)

    p = sub.add_parser("train", parents=[common], help="train a DL-GP")
    p.add_argument("--data", help="xy CSV to train on instead of the quantile design")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", parents=[common], help="predict at query inputs")
    p.add_argument("model", help="model file")
    p.add_argument("query", nargs="?", help="query CSV")
    p.add_argument("--level", help="central interval level (default 0.90)")
    p.add_argument("--dump-cov", help="also write per-query predictive covariances to this CSV")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", parents=[common], help="score a model on held-out data")
    p.add_argument("model", nargs="?", help="model file (default <output dir>/model.dlgp)")
    p.add_argument("--level", help="central interval level (default 0.90)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("benchmark-motorcycle", parents=[common], help="random-split motorcycle benchmark")
    p.add_argument("--models", help="comma-separated subset of dlgp, gp, qdl, mean")
    p.add_argument("--splits", type=int, help="number of random splits")
    p.set_defaults(func=cmd_benchmark)
    return parser


def _abs(raw):
    # paths given on the command line are relative to the working directory
    return None if raw is None else str(Path(raw).resolve())


def _overrides(args):
    verb = args.verb
    o = {}
    if verb == "simulate":
        o = {("simulate", "seed"): args.seed, ("simulate", "scenario_spec"): _abs(args.spec),
             ("simulate", "m"): args.m, ("simulate", "n_replicates"): args.replicates,
             ("simulate", "horizon_weeks"): args.horizon}
    elif verb == "prep-quantiles":
        o = {("quantiles", "levels"): args.levels}
    elif verb == "train":
        o = {("train", "seed"): args.seed, ("data", "train"): _abs(args.data)}
    elif verb == "benchmark-motorcycle":
        o = {("benchmark", "seed"): args.seed, ("benchmark", "models"): args.models,
             ("benchmark", "n_splits"): args.splits}
    return o


USER_ERRORS = (ConfigError, InputError, DomainError, FormatError, MetricError, FileNotFoundError,
               IsADirectoryError, PermissionError)


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, stream=sys.stderr, format="%(levelname)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, _overrides(args))
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return args.func(args, cfg)
    except FileNotFoundError as exc:
        name = exc.filename if exc.filename else None
        print(f"error: file not found: {name}" if name else f"error: {exc}", file=sys.stderr)
        return 2
    except USER_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (TrainingError, NumericalError, BenchmarkError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # unexpected: report and signal an internal failure
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
