"""Tests for the GP-guided hyper-parameter search."""

import numpy as np
import pytest

from loadcast.errors import ConfigError, OptimizationError
from loadcast.hyperopt import (
    BOResult,
    Dimension,
    SearchSpace,
    Trial,
    bo_optimize,
    default_space,
    export_history,
)

QUADRATIC_SPACE = SearchSpace((Dimension("x", "linear", 0.0, 1.0),))


def quadratic(point):
    return (point["x"] - 0.3) ** 2


def test_dimension_from_unit_endpoints():
    d_int = Dimension("n", "int", 2, 9)
    assert d_int.from_unit(0.0) == 2
    assert d_int.from_unit(1.0) == 9
    d_lin = Dimension("a", "linear", -1.0, 3.0)
    np.testing.assert_allclose(d_lin.from_unit(0.0), -1.0)
    np.testing.assert_allclose(d_lin.from_unit(0.5), 1.0)
    np.testing.assert_allclose(d_lin.from_unit(1.0), 3.0)
    d_log = Dimension("lr", "log", 1e-4, 1e-1)
    np.testing.assert_allclose(d_log.from_unit(0.0), 1e-4, rtol=1e-12)
    np.testing.assert_allclose(d_log.from_unit(1.0), 1e-1, rtol=1e-12)
    np.testing.assert_allclose(d_log.from_unit(0.5), np.sqrt(1e-4 * 1e-1), rtol=1e-12)
    d_cat = Dimension("k", "categorical", choices=("a", "b", "c"))
    assert d_cat.from_unit(0.0) == "a"
    assert d_cat.from_unit(0.99) == "c"


def test_dimension_from_unit_clips_out_of_range():
    d = Dimension("n", "int", 0, 4)
    assert d.from_unit(-0.5) == 0
    assert d.from_unit(1.5) == 4


def test_dimension_validation():
    with pytest.raises(ConfigError):
        Dimension("x", "triangular", 0.0, 1.0)
    with pytest.raises(ConfigError):
        Dimension("x", "linear", 2.0, 1.0)
    with pytest.raises(ConfigError):
        Dimension("x", "log", 0.0, 1.0)
    with pytest.raises(ConfigError):
        Dimension("x", "categorical")


def test_dimension_cardinality():
    assert Dimension("n", "int", 3, 7).cardinality() == 5
    assert Dimension("k", "categorical", choices=(1, 2)).cardinality() == 2
    assert Dimension("x", "linear", 0.0, 1.0).cardinality() is None


def test_search_space_validation_and_counting():
    with pytest.raises(ConfigError):
        SearchSpace(())
    with pytest.raises(ConfigError):
        SearchSpace((Dimension("x", "linear"), Dimension("x", "linear")))
    finite = SearchSpace(
        (Dimension("a", "int", 1, 3), Dimension("b", "categorical", choices=("u", "v")))
    )
    assert finite.point_count() == 6
    assert QUADRATIC_SPACE.point_count() is None


def test_search_space_contains():
    space = SearchSpace(
        (
            Dimension("depth", "int", 1, 8),
            Dimension("rate", "log", 1e-3, 1e-1),
            Dimension("kind", "categorical", choices=("a", "b")),
        )
    )
    assert space.contains({"depth": 4, "rate": 0.01, "kind": "a"})
    assert not space.contains({"depth": 9, "rate": 0.01, "kind": "a"})
    assert not space.contains({"depth": 4, "rate": 0.5, "kind": "a"})
    assert not space.contains({"depth": 4, "rate": 0.01, "kind": "z"})


def test_bo_optimize_converges_on_quadratic():
    for seed in range(5):
        result = bo_optimize(quadratic, QUADRATIC_SPACE, budget=30, seed=seed)
        assert abs(result.best.point["x"] - 0.3) < 0.05, f"seed {seed}"
        assert result.best.objective < 0.05**2


def test_bo_optimize_is_deterministic():
    a = bo_optimize(quadratic, QUADRATIC_SPACE, budget=20, seed=7)
    b = bo_optimize(quadratic, QUADRATIC_SPACE, budget=20, seed=7)
    assert [t.point for t in a.trials] == [t.point for t in b.trials]
    assert [t.objective for t in a.trials] == [t.objective for t in b.trials]
    assert a.best.point == b.best.point


def test_bo_optimize_budget_guard():
    with pytest.raises(ConfigError):
        bo_optimize(quadratic, QUADRATIC_SPACE, budget=4, seed=0)


def test_bo_optimize_records_failures_and_moves_on():
    def flaky(point):
        if point["x"] < 0.5:
            raise ValueError("left half is poisoned")
        return point["x"]

    result = bo_optimize(flaky, QUADRATIC_SPACE, budget=25, seed=1)
    assert result.failures
    assert all("ValueError" in failure["error"] for failure in result.failures)
    assert all(t.point["x"] >= 0.5 for t in result.trials)
    assert len(result.trials) + len(result.failures) == 25


def test_bo_optimize_rejects_non_finite_objectives():
    def leaky(point):
        return float("nan") if point["x"] > 0.5 else point["x"]

    result = bo_optimize(leaky, QUADRATIC_SPACE, budget=20, seed=2)
    assert all(np.isfinite(t.objective) for t in result.trials)
    assert any("non-finite" in failure["error"] for failure in result.failures)


def test_bo_optimize_raises_when_everything_fails():
    def broken(point):
        raise RuntimeError("always down")

    with pytest.raises(OptimizationError):
        bo_optimize(broken, QUADRATIC_SPACE, budget=8, seed=3)


def test_bo_optimize_stops_when_finite_space_is_exhausted():
    space = SearchSpace((Dimension("n", "int", 1, 4),))
    calls = []

    def objective(point):
        calls.append(point["n"])
        return float(point["n"])

    result = bo_optimize(objective, space, budget=50, seed=4)
    assert sorted(set(calls)) == sorted(calls)
    assert len(result.trials) <= 4
    assert result.best.point["n"] == min(calls)


def test_bo_optimize_ranks_trials():
    result = bo_optimize(quadratic, QUADRATIC_SPACE, budget=12, seed=5)
    ranked = sorted(result.trials, key=lambda t: t.rank)
    objectives = [t.objective for t in ranked]
    assert objectives == sorted(objectives)
    assert ranked[0].rank == 1
    assert result.best.objective == objectives[0]


def test_export_history_format(tmp_path):
    result = BOResult(
        best=Trial({"x": 0.3}, 0.0, rank=1),
        trials=[Trial({"x": 0.9}, 0.36, rank=2), Trial({"x": 0.3}, 0.0, rank=1)],
    )
    path = tmp_path / "history.csv"
    export_history(result, str(path))
    lines = path.read_text().splitlines()
    assert lines[0] == "trial,point,objective,incumbent"
    assert lines[1].startswith('1,"{\'x\': 0.9}",0.36,0.36')
    assert lines[2].startswith('2,"{\'x\': 0.3}",0.0,0.0')


def test_default_space_brackets_benchmark_defaults():
    tree_space = default_space("rt")
    assert tree_space.contains({"max_depth": 4, "max_leaves": 25})
    gbt_space = default_space("gbt")
    assert gbt_space.contains(
        {"estimators": 500, "learning_rate": 0.01, "subsample": 0.8, "min_child_samples": 90}
    )
    mlp_space = default_space("mlp")
    assert mlp_space.contains(
        {"hidden1": 16, "hidden2": 16, "learning_rate": 1e-3, "batch": 8, "epochs": 200}
    )
    lstm_space = default_space("lstm")
    assert lstm_space.contains(
        {
            "lstm1": 16,
            "lstm2": 8,
            "dense1": 8,
            "learning_rate": 1e-3,
            "batch": 8,
            "epochs": 200,
        }
    )


def test_default_space_rejects_untunable_models():
    for model_id in ("pm", "lr", "tsfm", "nope"):
        with pytest.raises(ConfigError):
            default_space(model_id)
