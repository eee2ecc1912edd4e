"""Command-line smoke tests: exit codes, printed artifacts and config reruns.

No training beyond a handful of steps; every run writes under `tmp_path`.
"""
from __future__ import annotations

import json

import numpy as np

from backend.app.core.config import get_config
from backend.app.nn import ParamSet, save_checkpoint
from scripts.routing_lab import main


def test_help_exits_cleanly(capsys):
    assert main(["--help"]) == 0
    assert "gen-graphs" in capsys.readouterr().out


def test_unknown_command_is_a_usage_error():
    assert main(["route-everything"]) == 1
    assert main(["eval-rl", "--mode", "sideways"]) == 1


def test_gen_graphs_prints_artifacts(tmp_path, capsys):
    out = tmp_path / "suite"
    assert main(["gen-graphs", "--graphs", "2", "--nodes", "10", "--seed", "1", "--out", str(out)]) == 0
    printed = capsys.readouterr().out.splitlines()
    assert printed[0] == f"Wrote 2 graphs to {out}"
    assert any(line.endswith("config.json") for line in printed)


def test_config_file_reproduces_run(tmp_path):
    first = tmp_path / "first"
    assert main(["gen-graphs", "--graphs", "2", "--nodes", "10", "--seed", "9", "--out", str(first)]) == 0
    config = json.loads((first / "config.json").read_text())
    config["out"] = str(tmp_path / "second")
    path = tmp_path / "rerun.json"
    path.write_text(json.dumps(config))
    # the file wins over the flags
    assert main(["gen-graphs", "--seed", "0", "--config", str(path)]) == 0
    for f in sorted(first.glob("graph_*.json")):
        assert f.read_bytes() == (tmp_path / "second" / f.name).read_bytes()


def test_invalid_graph_parameters_exit_one(tmp_path):
    assert main(["gen-graphs", "--graphs", "1", "--nodes", "5", "--degree", "3", "--out", str(tmp_path)]) == 1


def test_missing_inputs_exit_one(tmp_path, capsys):
    assert main(["baseline-sp", "--suite", str(tmp_path / "missing"), "--out", str(tmp_path / "sp")]) == 1
    assert "does not exist" in capsys.readouterr().err
    assert main(["adapt", "--out", str(tmp_path / "adapt")]) == 1
    assert main(["gen-graphs", "--config", str(tmp_path / "none.json")]) == 1


def test_runtime_errors_exit_two(tmp_path):
    params = ParamSet()
    params.add("w", np.zeros(2))
    bare = tmp_path / "bare.npz"
    save_checkpoint(bare, {"q": params})
    args = ["eval-rl", "--checkpoint", str(bare), "--graphs", "1", "--nodes", "8", "--out", str(tmp_path / "ev")]
    assert main(args) == 2


def test_plain_value_errors_exit_two(tmp_path, monkeypatch, capsys):
    broken = tmp_path / "broken.json"
    broken.write_text('{"graphs": ')
    assert main(["gen-graphs", "--config", str(broken), "--out", str(tmp_path / "a")]) == 2

    def fail(config):
        raise ValueError("validation split 5 must be smaller than count 5")

    monkeypatch.setattr("scripts.routing_lab.run_experiment", fail)
    assert main(["train-sl", "--out", str(tmp_path / "b")]) == 2
    assert "Traceback" not in capsys.readouterr().err


def test_settings_come_from_prefixed_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("ROUTING_LAB_DEFAULT_SEED", "7")
    monkeypatch.setenv("ROUTING_LAB_OUTPUT_DIR", str(tmp_path / "runs"))
    get_config.cache_clear()
    try:
        assert main(["gen-graphs", "--graphs", "1", "--nodes", "10"]) == 0
        config = json.loads((tmp_path / "runs" / "gen-graphs" / "config.json").read_text())
        assert config["seed"] == 7
    finally:
        get_config.cache_clear()
