from __future__ import annotations

import json
import subprocess
import sys

import numpy as np
import pytest

from torusfrag.cli import EXIT_RESOURCE, EXIT_USAGE, run
from torusfrag.voxels import HEADER_SIZE, load_voxels


def _json(capsys):
    out, err = capsys.readouterr()
    return (json.loads(out) if out.strip() else None), err


def test_simulate_writes_voxels(tmp_path, capsys):
    vox = tmp_path / "out.tfrg"
    code = run(["simulate", "-d", "3", "-N", "24", "-u", "2.5", "--seed", "1", "--dump-voxels", str(vox),
                "--out", str(tmp_path / "o")])
    doc, _ = _json(capsys)
    assert code == 0
    assert vox.stat().st_size == 4 * 24**3 + HEADER_SIZE
    d, n, labels = load_voxels(vox)
    assert (d, n) == (3, 24)
    assert int((labels == 0).sum()) == doc["c_max"]
    assert int((labels == -1).sum()) == doc["visited"]
    assert doc["config"]["seed"] == 1 and doc["config"]["u"] == 2.5
    assert json.loads((tmp_path / "o" / "simulate.json").read_text()) == doc


def test_reruns_are_byte_identical(tmp_path, capsys):
    outs = []
    for k in range(2):
        vox = tmp_path / f"v{k}.tfrg"
        run(["simulate", "-N", "16", "-u", "1.5", "--seed", "3", "--dump-voxels", str(vox)])
        out, _ = capsys.readouterr()
        outs.append((out.replace(str(vox), "V"), vox.read_bytes()))
    assert outs[0] == outs[1]


def test_unknown_subcommand_is_usage_error(capsys):
    assert run(["frobnicate"]) == EXIT_USAGE
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "usage"
    assert run([]) == EXIT_USAGE
    capsys.readouterr()


def test_config_file_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"N": 10, "u": 0.5, "seed": 4}))
    assert run(["simulate", "--config", str(cfg), "-u", "1.0"]) == 0
    doc, _ = _json(capsys)
    assert doc["config"]["N"] == 10 and doc["config"]["u"] == 1.0 and doc["config"]["seed"] == 4
    assert doc["steps"] == 1000


@pytest.mark.parametrize("text", ["{not json", "[1, 2]", '{"bogus": 1}'])
def test_malformed_config(tmp_path, capsys, text):
    cfg = tmp_path / "c.json"
    cfg.write_text(text)
    assert run(["simulate", "--config", str(cfg)]) == EXIT_USAGE
    assert json.loads(capsys.readouterr().err)["error"] == "usage"


def test_memory_guard_exit_code(monkeypatch, capsys):
    monkeypatch.setenv("TFRG_MEMORY_CAP_BYTES", "4096")
    assert run(["simulate", "-N", "64"]) == EXIT_RESOURCE
    assert json.loads(capsys.readouterr().err)["error"] == "resource"


def test_bad_param(capsys):
    assert run(["sweep", "--experiment", "mixing", "--param", "noequals"]) == EXIT_USAGE
    capsys.readouterr()


def test_sweep_and_validate(tmp_path, capsys):
    assert run(["sweep", "--experiment", "mixing", "-N", "4", "6", "--out", str(tmp_path)]) == 0
    doc, _ = _json(capsys)
    assert doc["checks"]["decreasing"]
    assert (tmp_path / "mixing.csv").exists()
    assert run(["validate", "--suite", "mixing", "--seed", "7", "--out", str(tmp_path)]) == 0
    doc, err = _json(capsys)
    assert doc["passed"] and "AC8" in err
    assert (tmp_path / "validate_mixing.json").exists()


def test_small_subcommands(capsys):
    assert run(["capacity", "--box", "0"]) == 0
    doc, _ = _json(capsys)
    assert doc["capacity"] == pytest.approx(0.6594626704490008, rel=1e-6)
    assert run(["capacity", "--points", "[[0,0,0],[1,0,0]]", "--method", "mc", "--samples", "500"]) == 0
    doc, _ = _json(capsys)
    assert abs(doc["capacity"] - 0.9838781150091238) < 4 * doc["stderr"]
    assert run(["quasistat", "-N", "8", "--box", "2", "--backend", "dense"]) == 0
    doc, _ = _json(capsys)
    assert doc["lambda1"] == pytest.approx(0.9546032222414224, abs=1e-12)
    assert run(["interlace", "--radius", "3", "-u", "1.0"]) == 0
    doc, _ = _json(capsys)
    assert doc["box_size"] == 343 and doc["trace_size"] + doc["largest_vacant"] <= 343


def test_dump_voxels_subcommand(tmp_path, capsys):
    p = tmp_path / "x.tfrg"
    assert run(["dump-voxels", "-N", "8", "-u", "0.5", str(p)]) == 0
    capsys.readouterr()
    assert p.stat().st_size == 4 * 512 + HEADER_SIZE


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "torusfrag.cli", "nosuch"], capture_output=True, text=True)
    assert proc.returncode == EXIT_USAGE
    assert json.loads(proc.stderr)["error"] == "usage"
