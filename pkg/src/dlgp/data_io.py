"""Datasets, standardization, CSV interchange and experiment designs.

Also hosts :func:`simulate_epidemic`, a small stochastic SIR-type counting
process used as a stand-in for an expensive agent-based epidemic model.
It is not a reproduction of any particular simulator.
"""
from __future__ import annotations

import configparser
import csv
import io
import logging
import math
import os
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InputError

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# standardization
# ---------------------------------------------------------------------------

@dataclass
class Standardizer:
    """Per-column z-score statistics (population standard deviation)."""

    mean: np.ndarray
    sd: np.ndarray
    constant: np.ndarray = field(default=None)

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float).reshape(-1)
        self.sd = np.asarray(self.sd, dtype=float).reshape(-1)
        if self.constant is None:
            self.constant = np.zeros(self.mean.shape, dtype=bool)
        self.constant = np.asarray(self.constant, dtype=bool).reshape(-1)

    @classmethod
    def fit(cls, x):
        x = np.asarray(x, dtype=float)
        if x.shape[0] == 0:
            return cls.identity(x.shape[1])
        mean = x.mean(axis=0)
        sd = x.std(axis=0)
        constant = ~(sd > 1e-12 * np.maximum(1.0, np.abs(mean)))
        if np.any(constant):
            warnings.warn(f"constant columns {np.flatnonzero(constant).tolist()} get sd=1", stacklevel=2)
        sd = np.where(constant, 1.0, sd)
        return cls(mean, sd, constant)

    @classmethod
    def identity(cls, width):
        return cls(np.zeros(width), np.ones(width))

    def apply(self, x):
        return (np.asarray(x, dtype=float) - self.mean) / self.sd

    def invert(self, z):
        return np.asarray(z, dtype=float) * self.sd + self.mean


@dataclass
class TrainingDataset:
    """Raw design ``theta`` (N x d) and outputs ``y`` (N x p) with their statistics."""

    theta: np.ndarray
    y: np.ndarray
    input_stats: Standardizer = None
    output_stats: Standardizer = None
    input_names: list = None
    output_names: list = None

    def __post_init__(self):
        self.theta = np.atleast_2d(np.asarray(self.theta, dtype=float))
        self.y = np.asarray(self.y, dtype=float)
        if self.y.ndim == 1:
            self.y = self.y[:, None]
        if self.theta.shape[0] != self.y.shape[0]:
            raise InputError(f"theta has {self.theta.shape[0]} rows but y has {self.y.shape[0]}")
        if not (np.all(np.isfinite(self.theta)) and np.all(np.isfinite(self.y))):
            raise InputError("dataset contains non-finite values")
        if self.input_stats is None:
            self.input_stats = Standardizer.fit(self.theta)
        if self.output_stats is None:
            self.output_stats = Standardizer.fit(self.y)
        if self.input_names is None:
            self.input_names = [f"x_{i + 1}" for i in range(self.d)]
        if self.output_names is None:
            self.output_names = [f"y_{i + 1}" for i in range(self.p)]

    @property
    def n(self):
        return self.theta.shape[0]

    @property
    def d(self):
        return self.theta.shape[1]

    @property
    def p(self):
        return self.y.shape[1]

    @property
    def input_mean(self):
        return self.input_stats.mean

    @property
    def input_sd(self):
        return self.input_stats.sd

    @property
    def output_mean(self):
        return self.output_stats.mean

    @property
    def output_sd(self):
        return self.output_stats.sd

    def subset(self, idx, refit=True):
        """Rows ``idx``; statistics are refitted on the subset unless ``refit`` is false."""
        idx = np.asarray(idx)
        kw = {} if refit else dict(input_stats=self.input_stats, output_stats=self.output_stats)
        return TrainingDataset(self.theta[idx], self.y[idx], input_names=self.input_names,
                               output_names=self.output_names, **kw)


def standardize(dataset: TrainingDataset):
    """Return ``(theta_z, y_z)`` using the dataset's own statistics."""
    return dataset.input_stats.apply(dataset.theta), dataset.output_stats.apply(dataset.y)


def destandardize(values, stats: Standardizer):
    return stats.invert(values)


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

INPUT_PREFIXES = ("x_", "theta_")
OUTPUT_PREFIXES = ("y_", "t_")


def read_numeric_csv(path):
    """Header plus float matrix. Errors carry 1-based file line numbers."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise InputError(f"{path}: empty file") from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise InputError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                vals = [float(c) for c in row]
            except ValueError:
                raise InputError(f"{path}:{lineno}: non-numeric cell in {row!r}") from None
            if not all(math.isfinite(v) for v in vals):
                raise InputError(f"{path}:{lineno}: non-finite value")
            rows.append(vals)
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return header, data


def load_xy_csv(path) -> TrainingDataset:
    """Load a table whose inputs are ``x_*``/``theta_*``/``alpha`` and outputs ``y_*``/``t_*``.

    Other columns (for instance ``scenario_id``) are ignored.
    """
    header, data = read_numeric_csv(path)
    in_cols = [i for i, h in enumerate(header) if h.startswith(INPUT_PREFIXES) or h == "alpha"]
    out_cols = [i for i, h in enumerate(header) if h.startswith(OUTPUT_PREFIXES)]
    if not in_cols or not out_cols:
        raise InputError(f"{path}: need input columns (x_*, theta_*, alpha) and output columns (y_*, t_*)")
    if data.shape[0] == 0:
        raise InputError(f"{path}: no data rows")
    return TrainingDataset(data[:, in_cols], data[:, out_cols],
                           input_names=[header[i] for i in in_cols],
                           output_names=[header[i] for i in out_cols])


def load_query_csv(path, expected_d):
    header, data = read_numeric_csv(path)
    cols = [i for i, h in enumerate(header) if h.startswith(INPUT_PREFIXES) or h == "alpha"]
    if not cols:
        cols = list(range(len(header)))
    if len(cols) != expected_d:
        raise InputError(f"{path}: model expects d={expected_d} inputs, found {len(cols)}")
    if data.shape[0] == 0:
        raise InputError(f"{path}: no query rows")
    return data[:, cols]


def format_float(v):
    return repr(float(v))


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else format_float(v) if isinstance(v, float) else v
                        for v in row])


def write_xy_csv(path, dataset: TrainingDataset):
    rows = [list(map(float, t)) + list(map(float, y)) for t, y in zip(dataset.theta, dataset.y)]
    write_csv(path, dataset.input_names + dataset.output_names, rows)


def motorcycle_path() -> Path:
    """``$DLGP_CACHE_DIR/mcycle.csv`` when present, otherwise the bundled copy."""
    cache = os.environ.get("DLGP_CACHE_DIR")
    if cache and (Path(cache) / "mcycle.csv").exists():
        return Path(cache) / "mcycle.csv"
    return Path(__file__).parent / "data" / "mcycle.csv"


def load_motorcycle(path=None) -> TrainingDataset:
    """Motorcycle crash data: ``time_ms`` input, ``acceleration_g`` output.

    With no ``path`` the file comes from :func:`motorcycle_path`.
    """
    path = motorcycle_path() if path is None else Path(path)
    if not path.exists():
        raise FileNotFoundError(f"file not found: {path}")
    text = path.read_text()
    if not text.strip():
        raise InputError(f"{path}: empty file")
    reader = csv.reader(io.StringIO(text))
    header = None
    rows = []
    for lineno, row in enumerate(reader, start=1):
        if not row:
            continue
        cells = [c.strip().strip('"') for c in row]
        if header is None:
            header = cells
            continue
        if cells == header:
            raise InputError(f"{path}:{lineno}: duplicated header")
        try:
            rows.append([float(c) for c in cells[-2:]])
        except ValueError:
            raise InputError(f"{path}:{lineno}: cannot parse {row!r}") from None
    if not rows:
        raise InputError(f"{path}: no data rows")
    data = np.array(rows)
    if not np.all(np.isfinite(data)):
        raise InputError(f"{path}: non-finite values")
    if data.shape[0] != 133:
        warnings.warn(f"motorcycle data has {data.shape[0]} rows, expected 133", stacklevel=2)
    return TrainingDataset(data[:, :1], data[:, 1:], input_names=["time_ms"],
                           output_names=["acceleration_g"])


def replicate_input_count(theta):
    """Number of rows whose input value appears more than once."""
    _, inverse, counts = np.unique(np.asarray(theta), axis=0, return_inverse=True, return_counts=True)
    dup = counts[inverse.reshape(-1)] > 1
    return int(np.sum(dup)), int(theta.shape[0] - counts.size)


# ---------------------------------------------------------------------------
# designs and the stand-in simulator
# ---------------------------------------------------------------------------

@dataclass
class ScenarioSpec:
    names: list
    lows: np.ndarray
    highs: np.ndarray

    def __post_init__(self):
        self.lows = np.asarray(self.lows, dtype=float)
        self.highs = np.asarray(self.highs, dtype=float)
        if not np.all(self.lows < self.highs):
            raise InputError("every parameter range needs lo < hi")

    @property
    def d(self):
        return len(self.names)

    @classmethod
    def epidemic_default(cls):
        # travel reduction is a fraction; see load_scenario_spec for overrides
        return cls(
            ["transmission_prob", "initial_infected", "hospital_delay",
             "hospital_efficacy", "travel_reduction"],
            [3e-5, 1.0, 2.0, 0.1, 0.0],
            [8e-5, 20.0, 10.0, 0.8, 1.0],
        )

    def contains(self, theta):
        theta = np.asarray(theta, dtype=float)
        return bool(np.all(theta >= self.lows) and np.all(theta <= self.highs))


def load_scenario_spec(path) -> ScenarioSpec:
    """Read ``[parameters]`` lines of the form ``name = lo, hi``."""
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise FileNotFoundError(f"file not found: {path}")
    if "parameters" not in cp:
        raise InputError(f"{path}: missing [parameters] section")
    names, lows, highs = [], [], []
    for name, value in cp["parameters"].items():
        try:
            lo, hi = (float(v) for v in value.split(","))
        except ValueError:
            raise InputError(f"{path}: parameter {name} needs 'lo, hi'") from None
        names.append(name)
        lows.append(lo)
        highs.append(hi)
    return ScenarioSpec(names, lows, highs)


def symmetric_lhs(m, spec: ScenarioSpec, seed):
    """Symmetric Latin hypercube of ``m`` rows (``m`` even).

    Row ``k + m/2`` is the reflection of row ``k`` through the centre of the
    box, and every column has exactly one point in each of ``m`` equal
    strata.
    """
    if m < 2 or m % 2:
        raise InputError(f"symmetric LHS needs an even m >= 2; try m={m + 1 if m % 2 else 2}")
    rng = np.random.default_rng(seed)
    half = m // 2
    unit = np.empty((m, spec.d))
    for c in range(spec.d):
        strata = rng.permutation(half)
        flip = rng.random(half) < 0.5
        strata = np.where(flip, m - 1 - strata, strata)
        # offsets strictly inside (0, 1) so the reflected point stays in its stratum
        offset = rng.integers(1, 2**53, size=half) / 2.0**53
        unit[:half, c] = (strata + offset) / m
        unit[half:, c] = (m - 1 - strata + (1.0 - offset)) / m
    return spec.lows + unit * (spec.highs - spec.lows)


@dataclass
class ReplicateTable:
    scenario_id: np.ndarray
    replicate_id: np.ndarray
    theta: np.ndarray
    trajectories: np.ndarray

    @property
    def horizon(self):
        return self.trajectories.shape[1]

    def scenario(self, sid):
        mask = self.scenario_id == sid
        return self.theta[mask][0], self.trajectories[mask]

    @classmethod
    def concat(cls, tables):
        return cls(*(np.concatenate([getattr(t, f) for t in tables])
                     for f in ("scenario_id", "replicate_id", "theta", "trajectories")))


# stand-in model constants
POPULATION = 100_000
CONTACT_SCALE = 25_000.0
REMOVAL_PROB = 0.7
TRAVEL_DAMPING = 0.5


def simulate_epidemic(theta, n_replicates, horizon_weeks, seed, scenario_id=0,
                      spec: ScenarioSpec | None = None) -> ReplicateTable:
    """Weekly stochastic SIR counting process returning cumulative infections.

    ``theta`` = (transmission probability, initial infected, intervention
    delay in weeks, intervention efficacy, travel reduction). Each week an
    infectious individual transmits at rate ``theta1 * CONTACT_SCALE``
    scaled by ``1 - TRAVEL_DAMPING * theta5``, and by ``1 - theta4`` once
    ``theta3`` weeks have passed. New infections are binomial in the
    susceptible pool; removals are binomial in the infectious pool.
    """
    spec = spec or ScenarioSpec.epidemic_default()
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if theta.shape[0] != 5:
        raise InputError(f"epidemic theta needs 5 entries, got {theta.shape[0]}")
    if not spec.contains(theta):
        raise InputError(f"theta {theta.tolist()} outside the scenario ranges")
    if horizon_weeks < 1 or n_replicates < 1:
        raise InputError("horizon_weeks and n_replicates must be >= 1")
    rng = np.random.default_rng(seed)
    beta0, i0, delay, efficacy, travel = theta
    i0 = int(round(i0))
    beta = beta0 * CONTACT_SCALE * (1.0 - TRAVEL_DAMPING * travel)
    infectious = np.full(n_replicates, i0, dtype=np.int64)
    susceptible = np.full(n_replicates, POPULATION - i0, dtype=np.int64)
    cumulative = np.full(n_replicates, i0, dtype=np.int64)
    out = np.empty((n_replicates, horizon_weeks))
    for week in range(horizon_weeks):
        rate = beta * (1.0 - efficacy) if week >= delay else beta
        p_inf = -np.expm1(-rate * infectious / POPULATION)
        new = rng.binomial(susceptible, p_inf)
        removed = rng.binomial(infectious, REMOVAL_PROB)
        susceptible -= new
        infectious += new - removed
        cumulative += new
        out[:, week] = cumulative
    return ReplicateTable(
        np.full(n_replicates, scenario_id, dtype=np.int64),
        np.arange(n_replicates, dtype=np.int64),
        np.tile(theta, (n_replicates, 1)),
        out,
    )


def simulate_design(design, n_replicates, horizon_weeks, seed, spec=None):
    """Simulate every row of ``design`` with per-scenario derived seeds."""
    seeds = np.random.SeedSequence(seed).spawn(len(design))
    return ReplicateTable.concat([
        simulate_epidemic(row, n_replicates, horizon_weeks, np.random.default_rng(s), sid, spec)
        for sid, (row, s) in enumerate(zip(design, seeds))
    ])


def write_replicates_csv(path, table: ReplicateTable):
    d = table.theta.shape[1]
    header = ["scenario_id", "replicate_id"] + [f"theta_{i + 1}" for i in range(d)] + \
        [f"t_{t}" for t in range(table.horizon)]
    rows = ([int(s), int(r)] + [float(v) for v in th] + [float(v) for v in tr]
            for s, r, th, tr in zip(table.scenario_id, table.replicate_id, table.theta, table.trajectories))
    write_csv(path, header, rows)


def read_replicates_csv(path) -> ReplicateTable:
    header, data = read_numeric_csv(path)
    if header[:2] != ["scenario_id", "replicate_id"]:
        raise InputError(f"{path}: replicate CSV must start with scenario_id, replicate_id")
    th = [i for i, h in enumerate(header) if h.startswith("theta_")]
    tt = [i for i, h in enumerate(header) if h.startswith("t_")]
    if not th or not tt:
        raise InputError(f"{path}: need theta_* and t_* columns")
    if data.shape[0] == 0:
        raise InputError(f"{path}: no replicate rows")
    traj = data[:, tt]
    if np.any(np.diff(traj, axis=1) < 0) or np.any(traj < 0):
        raise InputError(f"{path}: trajectories must be non-negative and non-decreasing")
    return ReplicateTable(data[:, 0].astype(np.int64), data[:, 1].astype(np.int64), data[:, th], traj)
