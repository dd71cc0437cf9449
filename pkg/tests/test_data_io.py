import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dlgp import data_io as io
from dlgp.errors import InputError


def test_standardize_hand_example():
    ds = io.TrainingDataset(np.array([[1.0], [2.0], [3.0]]), np.zeros(3) + np.arange(3))
    z, _ = io.standardize(ds)
    assert np.allclose(z[:, 0], [-1.2247, 0.0, 1.2247], atol=1e-4)


def test_constant_column_warns_and_maps_to_zero():
    with pytest.warns(UserWarning, match="constant"):
        st_ = io.Standardizer.fit(np.array([[5.0], [5.0], [5.0]]))
    assert np.all(st_.apply([[5.0], [5.0], [5.0]]) == 0)
    assert st_.sd[0] == 1.0


@given(seed=st.integers(0, 2**31 - 1))
def test_standardize_round_trip_property(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(6, 3)) * rng.uniform(0.1, 100, 3) + rng.normal(size=3) * 10
    s = io.Standardizer.fit(x)
    assert np.allclose(io.destandardize(s.apply(x), s), x, rtol=0, atol=1e-12 * np.max(np.abs(x)) + 1e-12)


def test_load_xy_csv(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("x_1,x_2,y_1\n1,2,3\n4,5,6\n")
    ds = io.load_xy_csv(p)
    assert ds.theta.shape == (2, 2) and ds.y.shape == (2, 1)
    assert ds.input_names == ["x_1", "x_2"]


@pytest.mark.parametrize("body,match", [
    ("x_1,y_1\n1,2\n3\n", r":3: expected 2 fields"),
    ("x_1,y_1\n1,2\nfoo,3\n", r":3: non-numeric"),
    ("x_1,y_1\n1,nan\n", r":2: non-finite"),
    ("", "empty file"),
    ("x_1,y_1\n", "no data rows"),
    ("a,b\n1,2\n", "need input columns"),
])
def test_load_xy_csv_errors(tmp_path, body, match):
    p = tmp_path / "d.csv"
    p.write_text(body)
    with pytest.raises(InputError, match=match):
        io.load_xy_csv(p)


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError, match="file not found"):
        io.load_xy_csv(tmp_path / "nope.csv")


def test_query_width_checked(tmp_path):
    p = tmp_path / "q.csv"
    p.write_text("x_1,x_2\n1,2\n")
    assert io.load_query_csv(p, 2).shape == (1, 2)
    with pytest.raises(InputError, match="d=3"):
        io.load_query_csv(p, 3)


def test_motorcycle_bundled():
    ds = io.load_motorcycle()
    assert ds.n == 133 and ds.d == 1 and ds.p == 1
    assert ds.theta[0, 0] == pytest.approx(2.4)


def test_motorcycle_cache_dir(tmp_path, monkeypatch):
    (tmp_path / "mcycle.csv").write_text('"","times","accel"\n"1",1.0,2.0\n"2",3.0,4.0\n')
    monkeypatch.setenv("DLGP_CACHE_DIR", str(tmp_path))
    with pytest.warns(UserWarning, match="133"):
        ds = io.load_motorcycle()
    assert ds.n == 2


def test_motorcycle_errors(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("")
    with pytest.raises(InputError, match="empty"):
        io.load_motorcycle(p)
    p.write_text("times,accel\n1,2\ntimes,accel\n3,4\n")
    with pytest.raises(InputError, match=":3: duplicated header"):
        io.load_motorcycle(p)


def test_lhs_small_examples():
    spec = io.ScenarioSpec(["a"], [0.0], [1.0])
    x = io.symmetric_lhs(2, spec, seed=0)[:, 0]
    assert sorted(np.floor(x * 2).astype(int)) == [0, 1]
    assert x[0] + x[1] == pytest.approx(1.0)
    with pytest.raises(InputError, match="m=4"):
        io.symmetric_lhs(3, spec, 0)


@given(half=st.integers(1, 30), d=st.integers(1, 5), seed=st.integers(0, 2**31 - 1))
def test_lhs_strata_and_symmetry_property(half, d, seed):
    m = 2 * half
    spec = io.ScenarioSpec([f"p{i}" for i in range(d)], np.zeros(d) - 1.0, np.arange(1, d + 1, dtype=float))
    X = io.symmetric_lhs(m, spec, seed)
    unit = (X - spec.lows) / (spec.highs - spec.lows)
    for c in range(d):
        assert sorted(np.floor(unit[:, c] * m).astype(int)) == list(range(m))
    assert np.allclose(X[:half] + X[half:], spec.lows + spec.highs)
    assert np.array_equal(X, io.symmetric_lhs(m, spec, seed))


def test_lhs_paper_scale():
    spec = io.ScenarioSpec.epidemic_default()
    X = io.symmetric_lhs(100, spec, 1)
    assert X.shape == (100, 5)
    assert all(spec.contains(row) for row in X)


def test_epidemic_shapes_and_floor():
    spec = io.ScenarioSpec.epidemic_default()
    table = io.simulate_epidemic([3e-5, 1.0, 2.0, 0.8, 1.0], 100, 56, seed=0)
    assert table.trajectories.shape == (100, 56)
    assert np.any(table.trajectories[:, -1] <= 3)
    with pytest.raises(InputError):
        io.simulate_epidemic([1.0, 1.0, 2.0, 0.5, 0.5], 2, 4, seed=0, spec=spec)


@given(seed=st.integers(0, 2**31 - 1), u=st.lists(st.floats(0, 1), min_size=5, max_size=5))
def test_epidemic_monotone_and_deterministic_property(seed, u):
    spec = io.ScenarioSpec.epidemic_default()
    theta = spec.lows + np.array(u) * (spec.highs - spec.lows)
    a = io.simulate_epidemic(theta, 3, 20, seed)
    b = io.simulate_epidemic(theta, 3, 20, seed)
    assert np.all(np.diff(a.trajectories, axis=1) >= 0)
    assert np.array_equal(a.trajectories, b.trajectories)


def test_replicate_csv_round_trip(tmp_path):
    design = io.symmetric_lhs(4, io.ScenarioSpec.epidemic_default(), 0)
    table = io.simulate_design(design, 2, 8, seed=3)
    assert table.trajectories.shape == (8, 8)
    io.write_replicates_csv(tmp_path / "r.csv", table)
    back = io.read_replicates_csv(tmp_path / "r.csv")
    assert np.array_equal(back.trajectories, table.trajectories)
    assert np.array_equal(back.theta, table.theta)


def test_scenario_spec_file(tmp_path):
    p = tmp_path / "spec.ini"
    p.write_text("[parameters]\na = 0, 1\nb = 2, 5\n")
    spec = io.load_scenario_spec(p)
    assert spec.names == ["a", "b"] and spec.highs.tolist() == [1.0, 5.0]
    p.write_text("[parameters]\na = 1, 0\n")
    with pytest.raises(InputError):
        io.load_scenario_spec(p)
