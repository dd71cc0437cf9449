import csv

import numpy as np
import pytest

from dlgp import model as dl
from dlgp.cli import load_config, main
from dlgp.errors import ConfigError


def read_rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def toy_xy(tmp_path):
    rng = np.random.default_rng(0)
    x = np.sort(rng.uniform(0, 3, 30))
    y = np.sin(2 * x) + 0.05 * rng.normal(size=30)
    path = tmp_path / "train.csv"
    path.write_text("x_1,y_1\n" + "".join(f"{float(a)!r},{float(b)!r}\n" for a, b in zip(x, y)))
    return path, x, y


@pytest.fixture
def toy_config(tmp_path, toy_xy):
    cfg = tmp_path / "exp.ini"
    cfg.write_text(f"""[data]
train = {toy_xy[0].name}

[network]
layers = 8:tanh, 1:identity

[train]
learning_rate = 0.05
n_steps = 100
slice_interval = 20

[output]
dir = out
""")
    return cfg


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_simulate_and_prep(tmp_path, capsys):
    reps = tmp_path / "reps.csv"
    code, out, _ = run(capsys, "simulate", "--m", 4, "--replicates", 2, "--horizon", 8, "--seed", 1,
                       "--out", reps)
    assert code == 0 and "8 trajectories" in out
    assert len(read_rows(reps)) == 8
    assert len(read_rows(tmp_path / "reps_design.csv")) == 4
    q = tmp_path / "q.csv"
    code, out, _ = run(capsys, "prep-quantiles", reps, "--out", q)
    assert code == 0 and len(read_rows(q)) == 20
    rows = read_rows(q)
    assert sorted({float(r["alpha"]) for r in rows}) == [0.05, 0.275, 0.5, 0.725, 0.95]


def test_simulate_odd_m(tmp_path, capsys):
    code, _, err = run(capsys, "simulate", "--m", 5, "--out", tmp_path / "r.csv")
    assert code == 2 and "m=6" in err


def test_simulate_is_byte_identical(tmp_path, capsys):
    for name in ("a.csv", "b.csv"):
        assert run(capsys, "simulate", "--m", 4, "--replicates", 3, "--horizon", 10, "--seed", 5,
                   "--out", tmp_path / name)[0] == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_prep_quantiles_errors(tmp_path, capsys):
    missing = tmp_path / "nope.csv"
    code, _, err = run(capsys, "prep-quantiles", missing)
    assert code == 2 and f"file not found: {missing}" in err
    reps = tmp_path / "reps.csv"
    run(capsys, "simulate", "--m", 2, "--replicates", 2, "--horizon", 4, "--out", reps)
    code, _, err = run(capsys, "prep-quantiles", reps, "--levels", "0.5, 0.2")
    assert code == 2 and "strictly increasing" in err


def test_train_predict_evaluate(tmp_path, toy_config, toy_xy, capsys):
    code, out, _ = run(capsys, "train", "--config", toy_config)
    assert code == 0 and "final log-likelihood" in out
    model_path = tmp_path / "out" / "model.dlgp"
    trace = read_rows(tmp_path / "out" / "trace.csv")
    assert len(trace) == 100 and list(trace[0]) == ["step", "log_likelihood"]

    query = tmp_path / "query.csv"
    query.write_text("x_1\n" + "".join(f"{float(v)!r}\n" for v in toy_xy[1][:5]))
    pred, cov = tmp_path / "pred.csv", tmp_path / "cov.csv"
    code, _, _ = run(capsys, "predict", model_path, query, "--out", pred, "--dump-cov", cov)
    assert code == 0
    rows = read_rows(pred)
    assert list(rows[0]) == ["y_1_mean", "y_1_lo", "y_1_hi"]
    covs = {int(r["query"]): float(r["cov"]) for r in read_rows(cov)}
    for m, r in enumerate(rows):
        lo, mean, hi = float(r["y_1_lo"]), float(r["y_1_mean"]), float(r["y_1_hi"])
        assert lo <= mean <= hi
        assert hi - lo == pytest.approx(2 * 1.6448536269514722 * np.sqrt(covs[m]), rel=1e-12)
        # training inputs: the posterior mean tracks the observed value
        assert mean == pytest.approx(toy_xy[2][m], abs=0.3)

    test = tmp_path / "test.csv"
    test.write_text(toy_xy[0].read_text())
    cfg2 = tmp_path / "eval.ini"
    cfg2.write_text(toy_config.read_text().replace("[data]\n", "[data]\ntest = test.csv\n"))
    code, out, _ = run(capsys, "evaluate", model_path, "--config", cfg2)
    assert code == 0 and "NMSE" in out
    assert float(read_rows(tmp_path / "out" / "evaluation.csv")[0]["nmse"]) < 0.2


def test_train_rerun_is_byte_identical(tmp_path, toy_config, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(capsys, "train", "--config", toy_config, "--out", a)[0] == 0
    assert run(capsys, "train", "--config", toy_config, "--out", b)[0] == 0
    for name in ("model.dlgp", "trace.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_train_q_mismatch_is_config_error(tmp_path, toy_config, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text(toy_config.read_text().replace("[network]\n", "[network]\nq = 3\n"))
    code, _, err = run(capsys, "train", "--config", cfg)
    assert code == 2 and "q = 3" in err
    assert not (tmp_path / "out" / "model.dlgp").exists()


def test_train_divergence_keeps_partial_trace(tmp_path, toy_config, capsys):
    cfg = tmp_path / "wild.ini"
    cfg.write_text(toy_config.read_text().replace("learning_rate = 0.05", "learning_rate = 1e7"))
    with pytest.warns(RuntimeWarning):
        code, _, err = run(capsys, "train", "--config", cfg, "--out", tmp_path / "w")
    assert code == 1 and "step" in err
    assert (tmp_path / "w" / "trace.csv").exists()
    assert not (tmp_path / "w" / "model.dlgp").exists()


def test_predict_errors(tmp_path, toy_config, capsys):
    run(capsys, "train", "--config", toy_config)
    model_path = tmp_path / "out" / "model.dlgp"
    wide = tmp_path / "wide.csv"
    wide.write_text("x_1,x_2\n1,2\n")
    code, _, err = run(capsys, "predict", model_path, wide)
    assert code == 2 and "d=1" in err
    empty = tmp_path / "empty.csv"
    empty.write_text("x_1\n")
    assert run(capsys, "predict", model_path, empty)[0] == 2
    bad = tmp_path / "bad.dlgp"
    bad.write_text("nonsense\n")
    assert run(capsys, "predict", bad, wide)[0] == 2


def test_config_validation(tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[train]\nlearnin_rate = 0.1\n")
    with pytest.raises(ConfigError, match="learnin_rate"):
        load_config(cfg)
    cfg.write_text("[extra]\na = 1\n")
    with pytest.raises(ConfigError, match="extra"):
        load_config(cfg)


def test_bad_config_value_exit_code(tmp_path, toy_config, capsys):
    cfg = tmp_path / "c.ini"
    cfg.write_text(toy_config.read_text().replace("n_steps = 100", "n_steps = many"))
    code, _, err = run(capsys, "train", "--config", cfg)
    assert code == 2 and "n_steps" in err


def test_benchmark_single_model(tmp_path, capsys):
    code, out, _ = run(capsys, "benchmark-motorcycle", "--models", "gp", "--splits", 2, "--out", tmp_path)
    assert code == 0
    rows = read_rows(tmp_path / "benchmark.csv")
    assert {r["model"] for r in rows if r["split_id"] in ("0", "1", "mean", "sd")} == {"gp"}
    assert any(r["split_id"] == "published_mean" for r in rows)
    assert "gp" in (tmp_path / "benchmark.txt").read_text()


def test_benchmark_unknown_model(tmp_path, capsys):
    code, _, err = run(capsys, "benchmark-motorcycle", "--models", "svm", "--out", tmp_path)
    assert code == 2 and "svm" in err


def test_pipeline_from_one_config(tmp_path, capsys):
    cfg = tmp_path / "pipe.ini"
    cfg.write_text("""[simulate]
m = 6
n_replicates = 5
horizon_weeks = 8

[quantiles]
holdout_scenarios = 0
output_transform = log1p

[network]
layers = 4:tanh, 2:identity

[train]
learning_rate = 0.02
n_steps = 20
slice_interval = 10

[output]
dir = run
""")
    for verb in ("simulate", "prep-quantiles", "train", "evaluate"):
        assert run(capsys, verb, "--config", cfg)[0] == 0, verb
    rows = read_rows(tmp_path / "run" / "evaluation.csv")
    assert len(rows) == 5 and {r["scenario_id"] for r in rows} == {"0"}
    assert dl.read_model_meta(tmp_path / "run" / "model.dlgp") == {"output_transform": "log1p"}
