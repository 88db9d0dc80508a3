from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from torusfrag import experiments as ex
from torusfrag.lattice import box_points
from torusfrag.experiments import (
    ExperimentConfig,
    ResourceGuardError,
    aggregate,
    check_memory,
    excursion_boxes,
    read_csv,
    replica_seed,
    run,
    tv_to_uniform,
    tv_uniformization,
)

SMALL = {
    "phase": dict(N=[12, 16], u=[0.5, 4.0], replicas=2),
    "sandwich": dict(N=[16], u=[1.0], eps=0.3, replicas=150),
    "excursions": dict(N=[16], u=[1.0, 2.0], eps=0.6, replicas=3),
    "mixing": dict(N=[4, 6]),
    "hitting-dist": dict(N=[12], replicas=1500, params={"r_A": 1, "r_B": 2}),
    "connectivity": dict(N=[8], u=[0.5, 5.0], replicas=3, params={"L": [2, 3], "bootstrap": 20}),
}


@pytest.fixture(scope="module")
def results():
    return {k: run(ExperimentConfig(experiment=k, **v)) for k, v in SMALL.items()}


def test_config_hash_ignores_workers_and_out():
    a = ExperimentConfig("phase", N=[16], u=[1.0])
    b = ExperimentConfig("phase", N=16, u=1.0, workers=4, out="/tmp/x")
    c = ExperimentConfig("phase", N=[16], u=[1.0], seed=1)
    assert a.hash() == b.hash() != c.hash()
    assert len(a.hash()) == 16
    assert json.dumps(a.resolved(), sort_keys=True) == json.dumps(b.resolved(), sort_keys=True)


@pytest.mark.parametrize("bad", [dict(experiment="nope"), dict(experiment="phase", replicas=0),
                                 dict(experiment="phase", workers=0), dict(experiment="phase", d=2),
                                 dict(experiment="phase", seed=-1), dict(experiment="phase", N=[])])
def test_config_validation(bad):
    with pytest.raises(ValueError):
        ExperimentConfig(**bad)


def test_replica_seeds_are_distinct_and_stable():
    seeds = {replica_seed(7, "phase", n, i) for n in (16, 32) for i in range(50)}
    assert len(seeds) == 100
    assert replica_seed(7, "phase", 16, 0) == replica_seed(7, "phase", 16, 0)
    assert all(0 <= s < 2**63 for s in seeds)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 3), st.floats(-1e6, 1e6, allow_nan=False)), min_size=1, max_size=40))
def test_aggregate_matches_direct_computation(rows):
    records = [{"g": g, "x": x} for g, x in rows]
    aggs = aggregate(records, ["g"], ["x"])
    assert [a["g"] for a in aggs] == list(dict.fromkeys(g for g, _ in rows))
    for a in aggs:
        xs = np.array([x for g, x in rows if g == a["g"]])
        assert a["n"] == len(xs)
        assert a["x_mean"] == pytest.approx(xs.mean(), abs=1e-6)
        if len(xs) > 1:
            assert a["x_stderr"] == pytest.approx(xs.std(ddof=1) / math.sqrt(len(xs)), rel=1e-6, abs=1e-6)


def test_reaggregation_is_bitwise_idempotent(results):
    for res in results.values():
        assert res.reaggregate() == res.aggregates


def test_csv_round_trip(results, tmp_path):
    for name, res in results.items():
        paths = res.write(tmp_path / name)
        reps, aggs = read_csv(paths["csv"])
        assert len(reps) == len(res.records)
        assert aggregate(reps, res.group_by, res.fields) == aggs
        header = paths["csv"].read_text().splitlines()[0].split(",")
        assert header[:2] == ["row_kind", "config_hash"]
        doc = json.loads(paths["json"].read_text())
        assert doc["config_hash"] == res.config_hash and doc["passed"] == res.passed
        assert json.loads(paths["timing"].read_text())["config_hash"] == res.config_hash
        assert all(line.split(",")[1] == res.config_hash for line in paths["csv"].read_text().splitlines()[1:])


@pytest.mark.parametrize("name", ["phase", "sandwich", "excursions", "hitting-dist", "connectivity"])
def test_worker_count_does_not_change_output(results, name):
    res2 = run(ExperimentConfig(experiment=name, workers=2, **SMALL[name]))
    assert res2.csv_text() == results[name].csv_text()
    assert res2.json_text() == results[name].json_text()


def test_run_writes_only_into_out(tmp_path):
    out = tmp_path / "o"
    run(ExperimentConfig("mixing", N=[4], out=str(out)))
    assert sorted(p.name for p in tmp_path.rglob("*") if p.is_file()) == ["mixing.csv", "mixing.json",
                                                                           "mixing.timing.json"]


def test_phase_records(results):
    res = results["phase"]
    for r in res.records:
        assert r["steps"] == math.floor(r["u"] * r["N"] ** 3)
        assert 0 <= r["c_max_frac"] <= 1 and r["c_sec"] <= r["c_max_frac"] * r["N"] ** 3
    # tiny levels leave one giant wrapping component
    low = [r for r in res.records if r["u"] == 0.5]
    assert all(r["c_max_frac"] > 0.4 for r in low)


def test_sandwich_summary(results):
    res = results["sandwich"]
    assert len(res.summary["table"]) == 3
    for row in res.summary["table"]:
        assert row["lower"] <= row["p_center"] <= row["upper"]
        assert row["sandwiched"] == (row["lower"] - 3 * row["sigma"] <= row["p_hat"] <= row["upper"] + 3 * row["sigma"])
    assert res.passed


def test_sandwich_rejects_large_window():
    with pytest.raises(ValueError):
        run(ExperimentConfig("sandwich", N=[8], eps=0.9, replicas=10,
                             params={"windows": {"ball2": box_points(2, 3).tolist()}}))


def test_excursion_boxes():
    assert excursion_boxes(64, 0.5) == (8, 22)
    assert excursion_boxes(16, 0.6) == (3, 6)
    with pytest.raises(ValueError):
        run(ExperimentConfig("excursions", N=[16], eps=0.5))


def test_excursions_bounded_by_horizon(results):
    res = results["excursions"]
    for key, kmax in res.summary["max_excursions_in_horizon"].items():
        N, u = key.split(":")
        assert all(r["K_u"] <= kmax for r in res.records if r["N"] == int(N) and r["u"] == float(u))


def test_exact_tv_matches_uniformization_oracle():
    for N, t in [(4, 3.0), (5, 10.0), (6, 25.0)]:
        assert tv_to_uniform(N, 3, t) == pytest.approx(tv_uniformization(N, 3, t), rel=1e-8, abs=1e-14)
    assert tv_to_uniform(6, 3, 0.0) == pytest.approx(1 - 1 / 216)
    vals = [tv_to_uniform(8, 3, t) for t in (10, 50, 200)]
    assert vals[0] > vals[1] > vals[2]


def test_mixing_decreasing(results):
    rows = results["mixing"].records
    assert rows[0]["tv"] > rows[1]["tv"]


def test_hitting_distribution_near_equilibrium(results):
    per = results["hitting-dist"].summary["per_N"]["12"]
    assert per["hits"] == 1500
    # loose: the boxes are tiny here
    assert per["max_deviation"] < 0.25


def test_connectivity_eta_ordered(results):
    res = results["connectivity"]
    assert res.checks["eta_brackets_threshold"]


def test_memory_guard(monkeypatch):
    monkeypatch.setenv("TFRG_MEMORY_CAP_BYTES", "1000")
    with pytest.raises(ResourceGuardError):
        check_memory(3, 10)
    check_memory(3, 6)
    with pytest.raises(ResourceGuardError):
        run(ExperimentConfig("phase", N=[16], u=[1.0]))
    monkeypatch.delenv("TFRG_MEMORY_CAP_BYTES")
    assert ex.memory_cap() == 2 * 1024**3
    with pytest.raises(ResourceGuardError):
        check_memory(4, 200)


def test_strong_probe_small():
    res = run(ExperimentConfig("strong", d=5, N=[1], u=[0.5], replicas=2))
    assert all(isinstance(r["touch"], bool) and isinstance(r["conn"], bool) for r in res.records)
    assert res.summary
