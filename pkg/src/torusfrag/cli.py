"""Command-line entry point.

Every subcommand resolves its configuration (JSON file from ``--config``,
then explicit flags on top), runs, and writes JSON results that echo the
resolved configuration. Failures print a JSON error object on stderr and
exit nonzero.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import experiments as ex
from .components import label_torus
from .interlace import sample_interlacement, vacant_component_stats
from .lattice import TorusGeom, box_points, linf_ball
from .potential import capacity_mc, equilibrium
from .quasistat import quasistationary
from .rw import WalkConfig, walk_trace
from .voxels import dump_voxels

EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_RESOURCE = 3
EXIT_ERROR = 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# flags shared by most subcommands; defaults are None so file values survive unless overridden
def _common(p: argparse.ArgumentParser, grid: bool = False):
    nargs = "+" if grid else None
    p.add_argument("-d", "--dim", type=int, dest="d")
    p.add_argument("-N", "--side", type=int, nargs=nargs, dest="N")
    p.add_argument("-u", "--u", type=float, nargs=nargs, dest="u")
    p.add_argument("--eps", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--replicas", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", type=str)
    p.add_argument("--config", type=str, help="JSON file with default values; flags override it")
    p.add_argument("-v", "--verbose", action="count", default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="torusfrag", description="Random walk vacant sets on the torus and random interlacements.")
    parser.add_argument("--version", action="version", version=f"torusfrag {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("simulate", help="walk trace on the torus and its vacant components")
    _common(p)
    p.add_argument("--dump-voxels", type=str, dest="dump_voxels")

    p = sub.add_parser("dump-voxels", help="write the component labels of one simulated trace")
    _common(p)
    p.add_argument("path")

    p = sub.add_parser("interlace", help="interlacement trace in a box")
    _common(p)
    p.add_argument("--radius", type=int)

    p = sub.add_parser("capacity", help="equilibrium measure and capacity of a set")
    _common(p)
    p.add_argument("--box", type=int, help="radius of the box B(0, r)")
    p.add_argument("--points", type=str, help="JSON list of integer points")
    p.add_argument("--method", choices=["richardson", "farfield", "mc"])
    p.add_argument("--samples", type=int)

    p = sub.add_parser("quasistat", help="quasistationary distribution outside a box")
    _common(p)
    p.add_argument("--box", type=int, help="radius of B")
    p.add_argument("--backend", choices=["auto", "power", "lanczos", "dense"])

    p = sub.add_parser("sweep", help="run an experiment over a grid")
    _common(p, grid=True)
    p.add_argument("--experiment", choices=ex.EXPERIMENTS)
    p.add_argument("--param", action="append", default=[], metavar="KEY=JSON",
                   help="experiment-specific parameter, value parsed as JSON")

    p = sub.add_parser("validate", help="run an acceptance suite")
    _common(p)
    p.add_argument("--suite", type=str)
    p.add_argument("--scale", choices=["full", "quick"])

    p = sub.add_parser("golden-regen", help="recompute the frozen equilibrium measures")
    _common(p)
    p.add_argument("--path", type=str)
    return parser


DEFAULTS = {
    "simulate": {"d": 3, "N": 64, "u": 1.0, "seed": 0, "out": None, "dump_voxels": None},
    "dump-voxels": {"d": 3, "N": 64, "u": 1.0, "seed": 0, "out": None},
    "interlace": {"d": 3, "radius": 8, "u": 1.0, "seed": 0, "out": None},
    "capacity": {"d": 3, "box": 0, "points": None, "method": "farfield", "samples": 2000, "seed": 0, "out": None},
    "quasistat": {"d": 3, "N": 8, "box": 2, "backend": "auto", "seed": 0, "out": None},
    "sweep": {"experiment": "phase", "d": 3, "N": [32], "u": [1.0], "eps": 0.5, "delta": 0.5, "replicas": 1,
              "seed": 0, "workers": 1, "out": None, "params": {}},
    "validate": {"suite": "vacancy", "seed": 0, "workers": 1, "scale": None, "out": None},
    "golden-regen": {"path": None},
}

_NOT_CONFIG = {"command", "config", "verbose", "param"}


def resolve(args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS[args.command])
    if args.config:
        try:
            loaded = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"malformed config {args.config}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise UsageError(f"config {args.config} must hold a JSON object")
        unknown = set(loaded) - set(cfg)
        if unknown:
            raise UsageError(f"unknown config keys {sorted(unknown)} for {args.command}")
        cfg.update(loaded)
    for k, v in vars(args).items():
        if k in _NOT_CONFIG or v is None:
            continue
        cfg[k] = v
    for item in getattr(args, "param", []) or []:
        key, sep, raw = item.partition("=")
        if not sep:
            raise UsageError(f"--param expects KEY=JSON, got {item!r}")
        try:
            cfg.setdefault("params", {})[key] = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise UsageError(f"--param {key}: {exc}") from exc
    return cfg


def _emit(doc: dict, out: str | None, name: str) -> None:
    text = json.dumps(ex._jsonable(doc), indent=1, sort_keys=True) + "\n"
    if out:
        d = Path(out)
        d.mkdir(parents=True, exist_ok=True)
        (d / name).write_text(text)
    sys.stdout.write(text)


def _simulate(cfg: dict):
    d, N, u = int(cfg["d"]), int(cfg["N"]), float(cfg["u"])
    ex.check_memory(d, N)
    geom = TorusGeom(d, N)
    steps = math.floor(u * N**d)
    mask = walk_trace(WalkConfig(geom, steps, "uniform", int(cfg["seed"])))
    stats = label_torus(geom, mask.bits)
    doc = {"config": cfg, "steps": steps, "visited": mask.visited, "components": stats.count,
           "c_max": stats.c_max, "c_max_frac": stats.c_max / N**d, "c_sec": stats.c_sec,
           "wraps": stats.wraps.tolist(), "wraps_all_axes": stats.wraps_all_axes}
    return doc, stats


def cmd_simulate(cfg: dict) -> int:
    doc, stats = _simulate(cfg)
    if cfg.get("dump_voxels"):
        doc["voxels"] = str(dump_voxels(stats, cfg["dump_voxels"]))
    _emit(doc, cfg["out"], "simulate.json")
    return 0


def cmd_dump_voxels(cfg: dict) -> int:
    doc, stats = _simulate(cfg)
    doc["voxels"] = str(dump_voxels(stats, cfg["path"]))
    _emit(doc, cfg["out"], "dump-voxels.json")
    return 0


def cmd_interlace(cfg: dict) -> int:
    r, u, d, seed = int(cfg["radius"]), float(cfg["u"]), int(cfg["d"]), int(cfg["seed"])
    s = sample_interlacement(r, u, seed=seed, d=d)
    stats = vacant_component_stats(r, u, seed=seed, d=d)
    doc = {"config": cfg, "J": s.J, "trace_size": int(s.trace.sum()), "box_size": int(s.trace.size),
           "vacant_components": stats.count, "largest_vacant": stats.c_max, "second_vacant": stats.c_sec}
    _emit(doc, cfg["out"], "interlace.json")
    return 0


def cmd_capacity(cfg: dict) -> int:
    d = int(cfg["d"])
    if cfg.get("points"):
        A = np.array(json.loads(cfg["points"]), dtype=np.int64).reshape(-1, d)
    else:
        A = box_points(int(cfg["box"]), d)
    if cfg["method"] == "mc":
        cap, sd = capacity_mc(A, n=int(cfg["samples"]), seed=int(cfg["seed"]))
        doc = {"config": cfg, "capacity": cap, "stderr": sd}
    else:
        eq = equilibrium(A, method=cfg["method"])
        doc = {"config": cfg, "capacity": eq.capacity, "error": eq.error, "method": eq.method, "meta": eq.meta,
               "boundary": eq.boundary.tolist(), "weights": eq.weights.tolist()}
    _emit(doc, cfg["out"], "capacity.json")
    return 0


def cmd_quasistat(cfg: dict) -> int:
    geom = TorusGeom(int(cfg["d"]), int(cfg["N"]))
    q = quasistationary(geom, linf_ball(0, int(cfg["box"]), geom), backend=cfg["backend"], seed=int(cfg["seed"]))
    doc = {"config": cfg, "lambda1": q.lambda1, "lambda2": q.lambda2, "gap": q.gap,
           "gap_times_N2": q.gap * geom.N**2, "residual": q.residual, "backend": q.backend,
           "sigma_max": float(q.sigma.max()), "sigma_min": float(q.sigma.min())}
    _emit(doc, cfg["out"], "quasistat.json")
    return 0


def cmd_sweep(cfg: dict) -> int:
    ecfg = ex.ExperimentConfig(experiment=cfg["experiment"], d=int(cfg["d"]), N=cfg["N"], u=cfg["u"],
                               eps=float(cfg["eps"]), delta=float(cfg["delta"]), replicas=int(cfg["replicas"]),
                               seed=int(cfg["seed"]), workers=int(cfg["workers"]), out=cfg["out"],
                               params=dict(cfg.get("params") or {}))
    res = ex.run(ecfg)
    sys.stdout.write(res.json_text())
    return 0


def cmd_validate(cfg: dict) -> int:
    from .validation import SUITES, run_suite

    names = list(SUITES) if cfg["suite"] == "all" else [cfg["suite"]]
    ok = True
    reports = []
    for name in names:
        rep = run_suite(name, seed=int(cfg["seed"]), workers=int(cfg["workers"]), scale=cfg["scale"])
        ok &= rep.passed
        reports.append(rep)
        print(rep.line(), file=sys.stderr)
        if cfg["out"]:
            d = Path(cfg["out"])
            d.mkdir(parents=True, exist_ok=True)
            (d / f"validate_{name}.json").write_bytes(rep.canonical())
    summary = {"config": cfg, "passed": ok, "suites": {r.suite: r.passed for r in reports}}
    sys.stdout.write(json.dumps(summary, indent=1, sort_keys=True) + "\n")
    return 0 if ok else EXIT_FAIL


def cmd_golden_regen(cfg: dict) -> int:
    from .golden import regenerate

    regenerate(Path(cfg["path"]) if cfg["path"] else None, log=lambda m: print(m, file=sys.stderr))
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "dump-voxels": cmd_dump_voxels,
    "interlace": cmd_interlace,
    "capacity": cmd_capacity,
    "quasistat": cmd_quasistat,
    "sweep": cmd_sweep,
    "validate": cmd_validate,
    "golden-regen": cmd_golden_regen,
}


def _error(kind: str, exc: BaseException | str, code: int) -> int:
    print(json.dumps({"error": kind, "message": str(exc)}), file=sys.stderr)
    return code


def run(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise UsageError("missing subcommand; expected one of " + ", ".join(COMMANDS))
        cfg = resolve(args)
        return COMMANDS[args.command](cfg)
    except UsageError as exc:
        return _error("usage", exc, EXIT_USAGE)
    except ex.ResourceGuardError as exc:
        return _error("resource", exc, EXIT_RESOURCE)
    except (ValueError, KeyError, OSError) as exc:
        return _error(type(exc).__name__, exc, EXIT_ERROR)


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
