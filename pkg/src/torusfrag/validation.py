"""Acceptance suites.

Each suite runs one acceptance check at its stated size and tolerance and
returns a ``SuiteReport``. ``scale="quick"`` shrinks the sample sizes for
smoke runs. The determinism suite reruns every randomized suite with 1 and 8
workers and compares the serialized reports byte for byte.
"""
from __future__ import annotations

import hashlib
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma

from . import experiments as ex
from .components import uniqueness_check
from .golden import box_capacity
from .interlace import vacancy_prob
from .lattice import TorusGeom, box_points, linf_ball
from .potential import capacity_mc, equilibrium, mean_hitting
from .quasistat import conditional_distribution, quasistationary, sup_distance
from .rng import stream
from .rw import WalkConfig, regeneration_time, walk_trace


@dataclass
class SuiteReport:
    suite: str
    criterion: int
    passed: bool
    metrics: dict
    details: str = ""
    runtime_s: float = field(default=0.0, compare=False)

    def canonical(self) -> bytes:
        """Serialized report without the wall-clock, for byte comparisons."""
        doc = {"suite": self.suite, "criterion": self.criterion, "passed": self.passed,
               "metrics": ex._jsonable(self.metrics), "details": self.details}
        return (json.dumps(doc, indent=1, sort_keys=True) + "\n").encode()

    def line(self) -> str:
        return f"AC{self.criterion:<2d} {self.suite:<13s} {'PASS' if self.passed else 'FAIL'}  {self.details}"


def _digest(res: ex.RunResult) -> dict:
    return {"csv_sha256": hashlib.sha256(res.csv_text().encode()).hexdigest(),
            "json_sha256": hashlib.sha256(res.json_text().encode()).hexdigest()}


def watson_capacity() -> float:
    """cap({0}) in d = 3 from the closed form of the lattice Green function at the origin."""
    g0 = math.sqrt(6) / (32 * math.pi**3) * gamma(1 / 24) * gamma(5 / 24) * gamma(7 / 24) * gamma(11 / 24)
    return 1.0 / g0


# --------------------------------------------------------------------------

VACANCY_SETS = {"point": [[0, 0, 0]], "ball1": box_points(1, 3).tolist(), "pair": [[0, 0, 0], [1, 0, 0]]}


def suite_vacancy(seed: int = 0, workers: int = 1, scale: str = "full") -> SuiteReport:
    n = 100_000 if scale == "full" else 2_000
    rows, ok = [], True
    for u in (0.5, 1.0, 2.0):
        res = vacancy_prob([np.array(v) for v in VACANCY_SETS.values()], u, n, seed=seed, r=1, workers=workers)
        for name, r in zip(VACANCY_SETS, res):
            good = abs(r.p_hat - r.p_theory) <= 3 * r.stderr
            ok &= good
            rows.append({"set": name, "u": u, "p_hat": r.p_hat, "stderr": r.stderr, "p_theory": r.p_theory,
                         "capacity": r.capacity, "z": r.z, "bias_flag": r.bias_flag, "ok": good})
    worst = max(abs(r["z"]) for r in rows)
    return SuiteReport("vacancy", 1, ok, {"n": n, "rows": rows}, f"max |z| = {worst:.2f} over 9 (V, u) pairs")


CAPACITY_SETS = {
    "point": [[0, 0, 0]],
    "pair": [[0, 0, 0], [1, 0, 0]],
    "line3": [[-1, 0, 0], [0, 0, 0], [1, 0, 0]],
    "ell": [[0, 0, 0], [1, 0, 0], [0, 1, 0]],
    "ball1": box_points(1, 3).tolist(),
}


def suite_capacity(seed: int = 0, workers: int = 1, scale: str = "full") -> SuiteReport:
    n = 2_000 if scale == "full" else 200
    oracle = watson_capacity()
    cap0 = equilibrium(np.zeros((1, 3), dtype=np.int64)).capacity
    rows, ok = [], abs(cap0 - oracle) <= 1e-3
    for i, (name, pts) in enumerate(CAPACITY_SETS.items()):
        A = np.array(pts, dtype=np.int64)
        ref = equilibrium(A).capacity
        mc, sd = capacity_mc(A, n=n, seed=seed + i)
        good = abs(mc - ref) <= 3 * sd
        ok &= good
        rows.append({"set": name, "equilibrium": ref, "mc": mc, "mc_sd": sd, "ok": good})
    return SuiteReport("capacity", 2, bool(ok), {"point": cap0, "oracle": oracle, "rows": rows},
                       f"cap({{0}}) = {cap0:.8f} vs {oracle:.8f}; MC within 3 sd for "
                       f"{sum(r['ok'] for r in rows)}/{len(rows)} sets")


def suite_scaling(seed: int = 0, workers: int = 1, scale: str = "full") -> SuiteReport:
    rs = np.arange(2, 17)
    caps = np.array([box_capacity(int(r), 3) for r in rs])
    slope = float(np.polyfit(np.log(rs), np.log(caps), 1)[0])
    ok = 0.85 <= slope <= 1.15
    return SuiteReport("scaling", 3, ok, {"radii": rs.tolist(), "capacities": caps.tolist(), "slope": slope},
                       f"log-log slope {slope:.4f}")


def suite_hitting_time(seed: int = 0, workers: int = 1, scale: str = "full") -> SuiteReport:
    n = 10_000 if scale == "full" else 500
    geom = TorusGeom(3, 40)
    V = linf_ball(0, 3, geom)
    mh = mean_hitting(geom, V, n, seed=seed, capacity=box_capacity(3, 3))
    dev = abs(mh.gloc_ratio - 1)
    return SuiteReport("hitting-time", 4, dev <= 0.1,
                       {"n": n, "H_bar": mh.H_bar, "stderr": mh.stderr, "ratio": mh.gloc_ratio, "capacity": mh.capacity},
                       f"N^d/(E[H] cap) = {mh.gloc_ratio:.4f} (+- {mh.gloc_ratio * mh.stderr / mh.H_bar:.4f})")


def suite_quasistat(seed: int = 0, workers: int = 1, scale: str = "full") -> SuiteReport:
    geom = TorusGeom(3, 8)
    B = linf_ball(0, 2, geom)
    qp = quasistationary(geom, B, backend="power", seed=seed)
    qd = quasistationary(geom, B, backend="dense")
    diff = float(np.abs(qp.sigma - qd.sigma).max())
    t_star = regeneration_time(8)
    cond = conditional_distribution(geom, B, qd.sites, t_star)
    sup_t = sup_distance(cond, qd.sigma)
    # asymptotic one-unit decay of the worst start, against lambda2 / lambda1
    x = qd.sites[int(np.argmax(np.abs(cond - qd.sigma[:, None]).max(axis=0)))]
    t0 = 100.0
    d0 = sup_distance(conditional_distribution(geom, B, x, t0), qd.sigma)
    d1 = sup_distance(conditional_distribution(geom, B, x, t0 + 1), qd.sigma)
    ratio = d1 / d0
    target = qd.lambda2 / qd.lambda1
    rel = abs(ratio / target - 1)
    ok = diff <= 1e-8 and sup_t <= 1e-6 and rel <= 0.1
    return SuiteReport("quasistat", 5, ok,
                       {"lambda1": qd.lambda1, "lambda2": qd.lambda2, "power_vs_dense": diff, "t_star": t_star,
                        "sup_at_t_star": sup_t, "decay_ratio": ratio, "lambda_ratio": target,
                        "semigroup_ratio": math.exp(-(qd.lambda1 - qd.lambda2)), "relative_error": rel},
                       f"|power-dense| = {diff:.1e}, sup at t* = {sup_t:.1e}, decay {ratio:.4f} vs "
                       f"lambda2/lambda1 {target:.4f}")


def _experiment_suite(name: str, criterion: int, cfg: ex.ExperimentConfig, detail) -> SuiteReport:
    res = ex.run(cfg)
    metrics = {"checks": res.checks, "summary": res.summary, **_digest(res)}
    return SuiteReport(name, criterion, res.passed, metrics, detail(res))


def suite_hitting_dist(seed: int = 0, workers: int = 1, scale: str = "full") -> SuiteReport:
    n = 100_000 if scale == "full" else 2_000
    cfg = ex.ExperimentConfig("hitting-dist", d=3, N=[32, 64], eps=0.5, replicas=n, seed=seed, workers=workers,
                              params={"r_A": 4})

    def detail(res):
        per = res.summary["per_N"]
        return ", ".join(f"N={k}: max dev {v['max_deviation']:.4f}" for k, v in per.items())

    return _experiment_suite("hitting-dist", 6, cfg, detail)


def suite_excursions(seed: int = 0, workers: int = 1, scale: str = "full") -> SuiteReport:
    cfg = ex.ExperimentConfig("excursions", d=3, N=[64], u=[1.0], eps=0.5, replicas=100 if scale == "full" else 5,
                              seed=seed, workers=workers)

    def detail(res):
        a = res.aggregates[0]
        return (f"in-window frequency {a['in_window_mean']:.2f}, mean K_u {a['K_u_mean']:.2f} vs u cap(A) "
                f"{res.summary['boxes']['64']['capacity_A']:.2f}")

    return _experiment_suite("excursions", 7, cfg, detail)


def suite_mixing(seed: int = 0, workers: int = 1, scale: str = "full") -> SuiteReport:
    cfg = ex.ExperimentConfig("mixing", d=3, N=[6, 8, 10, 12], seed=seed, workers=workers)
    return _experiment_suite("mixing", 8, cfg,
                             lambda res: ", ".join(f"N={r['N']}: {r['tv']:.2e}" for r in res.records))


def suite_phase(seed: int = 0, workers: int = 1, scale: str = "full") -> SuiteReport:
    N = 200 if scale == "full" else 40
    cfg = ex.ExperimentConfig("phase", d=3, N=[N], u=[2.5, 3.5], replicas=5, seed=seed, workers=workers)

    def detail(res):
        s = res.summary
        return f"ratio {s.get(f'ratio_N{N}', math.nan):.2f}, wrap frequency {s.get(f'wrap_freq_N{N}', math.nan):.2f}"

    return _experiment_suite("phase", 9, cfg, detail)


def suite_sandwich(seed: int = 0, workers: int = 1, scale: str = "full") -> SuiteReport:
    cfg = ex.ExperimentConfig("sandwich", d=3, N=[32, 64], u=[1.0], eps=0.3,
                              replicas=10_000 if scale == "full" else 200, seed=seed, workers=workers)
    return _experiment_suite("sandwich", 10, cfg,
                             lambda res: f"violations per N {res.summary['violations']}")


def uniqueness_masks(n_masks: int, N: int, seed: int):
    """Walk traces at levels spread over the phase diagram, plus Bernoulli site masks."""
    geom = TorusGeom(3, N)
    rng = stream(seed, "uniqueness", "levels")
    for i in range(n_masks):
        if i % 2 == 0:
            u = float(rng.uniform(0.1, 5.0))
            yield {"kind": "walk", "u": u}, walk_trace(WalkConfig(geom, math.floor(u * N**3), "uniform",
                                                                  seed * 1_000_003 + i)).bits
        else:
            p = float(rng.uniform(0.05, 0.9))
            yield {"kind": "bernoulli", "p": p}, stream(seed, "uniqueness", "mask", i).random(geom.total) < p


def suite_uniqueness(seed: int = 0, workers: int = 1, scale: str = "full") -> SuiteReport:
    n_masks = 200 if scale == "full" else 10
    N, ell = 30, 3
    geom = TorusGeom(3, N)
    violations, held, rows = 0, 0, []
    for meta, occ in uniqueness_masks(n_masks, N, seed):
        rep = uniqueness_check(geom, occ, ell)
        held += rep.hypotheses_hold
        bad = rep.hypotheses_hold and not rep.conclusion_holds
        violations += bad
        rows.append({**meta, "h1": rep.hypothesis1, "h2": rep.hypothesis2, "conclusion": rep.conclusion_holds})
    return SuiteReport("uniqueness", 11, violations == 0,
                       {"masks": n_masks, "hypotheses_held": held, "violations": violations, "rows": rows},
                       f"{violations} violations; hypotheses held on {held}/{n_masks} masks")


RANDOMIZED = {
    "vacancy": suite_vacancy, "capacity": suite_capacity, "hitting-time": suite_hitting_time,
    "hitting-dist": suite_hitting_dist, "excursions": suite_excursions, "phase": suite_phase,
    "sandwich": suite_sandwich, "uniqueness": suite_uniqueness,
}


def suite_determinism(seed: int = 0, workers: int = 8, scale: str = "full") -> SuiteReport:
    """Reruns each randomized suite with 1 and ``workers`` workers; outputs must match byte for byte."""
    rows, ok = [], True
    for name, fn in RANDOMIZED.items():
        a = fn(seed=seed, workers=1, scale=scale).canonical()
        b = fn(seed=seed, workers=workers, scale=scale).canonical()
        same = a == b
        ok &= same
        rows.append({"suite": name, "identical": same, "sha256": hashlib.sha256(a).hexdigest()})
    return SuiteReport("determinism", 12, ok, {"workers": workers, "scale": scale, "rows": rows},
                       f"{sum(r['identical'] for r in rows)}/{len(rows)} suites byte-identical (1 vs {workers} workers)")


SUITES = {
    "vacancy": suite_vacancy,
    "capacity": suite_capacity,
    "scaling": suite_scaling,
    "hitting-time": suite_hitting_time,
    "quasistat": suite_quasistat,
    "hitting-dist": suite_hitting_dist,
    "excursions": suite_excursions,
    "mixing": suite_mixing,
    "phase": suite_phase,
    "sandwich": suite_sandwich,
    "uniqueness": suite_uniqueness,
    "determinism": suite_determinism,
}


def run_suite(name: str, seed: int = 0, workers: int = 1, scale: str | None = None) -> SuiteReport:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; expected one of {sorted(SUITES)}")
    t0 = time.perf_counter()
    kw = {"seed": seed, "workers": workers if name != "determinism" else max(workers, 8)}
    if scale is not None:
        kw["scale"] = scale
    rep = SUITES[name](**kw)
    rep.runtime_s = time.perf_counter() - t0
    return rep
