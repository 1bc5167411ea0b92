import csv
import hashlib
import json
import subprocess
import sys
from pathlib import Path

import pytest

from waitline.cli import EXIT_CONFIG, EXIT_FAILED, EXIT_OK, ConfigError, load_config, main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def run(name, out, *extra):
    return main(["simulate" if name[0] == "s" else name.split(":")[0], "--config", str(CONFIGS / name.split(":")[1]), "--out", str(out), *extra])


def digest(folder):
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(Path(folder).iterdir())}


def test_simulate_is_byte_identical(tmp_path):
    assert run("simulate:trivial.json", tmp_path / "a", "--runs", "2000") == EXIT_OK
    assert run("simulate:trivial.json", tmp_path / "b", "--runs", "2000") == EXIT_OK
    assert digest(tmp_path / "a") == digest(tmp_path / "b")
    assert {"outcomes.csv", "summary.json", "rush_events.csv"} <= set(digest(tmp_path / "a"))


def test_outputs_carry_hash_and_seed(tmp_path):
    run("simulate:trivial.json", tmp_path, "--runs", "500")
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["seed"] == 42 and len(summary["config_hash"]) == 16
    for name in ("outcomes.csv", "rush_events.csv"):
        head = (tmp_path / name).read_text().splitlines()[:2]
        assert head == [f"# config_hash: {summary['config_hash']}", "# seed: 42"]
    assert summary["efficiency_frequency"] == 1.0


def test_seed_precedence(tmp_path, monkeypatch):
    path = CONFIGS / "trivial.json"
    assert load_config(path).seed == 42
    monkeypatch.setenv("SEED", "7")
    assert load_config(path).seed == 7
    assert load_config(path, {"seed": 9}).seed == 9
    assert load_config(path).config_hash != load_config(path, {"seed": 9}).config_hash
    monkeypatch.setenv("SEED", "x")
    with pytest.raises(ConfigError):
        load_config(path)


def test_cbn_simulation_is_efficient_with_beliefs(tmp_path):
    assert run("simulate:continuous-bad-news.json", tmp_path, "--runs", "20000", "--particles", "5000") == EXIT_OK
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["efficiency_frequency"] == 1.0
    lines = (tmp_path / "beliefs.csv").read_text().splitlines()
    assert any(l.startswith("# sudden_bad_news: []") for l in lines)
    assert "time,depth,kappa,probability" in lines


def test_full_revelation_rush_recorded(tmp_path):
    assert run("simulate:full-revelation-rush.json", tmp_path, "--runs", "3000") == EXIT_OK
    doc = json.loads((tmp_path / "outcomes.json").read_text())
    assert any(o["rush_events"] for o in doc["outcomes"])
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["efficiency_frequency"] < 1 and summary["rush_events"] > 0


def test_verify_appendix(tmp_path):
    assert run("verify:appendix-d.json", tmp_path) == EXIT_OK
    report = json.loads((tmp_path / "verify.json").read_text())
    assert report["passed"] and all(c["passed"] for c in report["suites"]["appendix_d"])
    assert (tmp_path / "deviations.csv").read_text().splitlines()[2] == "value,deviation,mean_gain,std_err,certified_cell"


def test_verify_fault_injection_fails(tmp_path, capsys):
    assert run("verify:fault-injected.json", tmp_path) == EXIT_FAILED
    err = capsys.readouterr().err
    assert "FAIL best_response" in err


def test_verify_benchmark_gap_report(tmp_path):
    assert run("verify:eq1-benchmark.json", tmp_path, "--runs", "20000") == EXIT_OK
    lines = (tmp_path / "payoff_equivalence.csv").read_text().splitlines()
    assert lines[2].startswith("bin_lo,bin_hi,winners")
    assert len(lines) == 3 + 10


def test_welfare_sweep(tmp_path):
    assert run("welfare:welfare-sweep.json", tmp_path) == EXIT_OK
    lines = (tmp_path / "welfare.csv").read_text().splitlines()
    rows = list(csv.reader(l for l in lines if not l.startswith("#")))[1:]
    hazards = {r[0]: r[8] for r in rows}
    assert hazards["uniform(0, 1)"] == "Increasing" and hazards["pareto(1, 2)"] == "Decreasing"
    assert all(r[10] == "1" for r in rows)
    assert rows[-1][7] == "Equal"


def test_welfare_entry_cost(tmp_path):
    assert run("welfare:entry-cost-pareto.json", tmp_path) == EXIT_OK
    text = (tmp_path / "corollary2.csv").read_text()
    assert "queue-full strictly highest" in text
    body = [l.split(",") for l in text.splitlines() if l and not l.startswith("#")][1:]
    surplus = {r[0]: float(r[2]) for r in body}
    assert surplus["queue-full"] > max(surplus["trivial"], surplus["rush"])


def test_config_errors(tmp_path, capsys):
    assert main(["simulate", "--config", str(tmp_path / "missing.json")]) == EXIT_CONFIG
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"game": {"n": 3, "k": 2, "distribution": {"kind": "uniform", "params": [0, 1]}}, "strategy": "nope"}))
    assert main(["simulate", "--config", str(bad)]) == EXIT_CONFIG
    bad.write_text(json.dumps({"game": {"n": 2, "k": 2, "distribution": {"kind": "uniform", "params": [0, 1]}}}))
    assert main(["simulate", "--config", str(bad)]) == EXIT_CONFIG
    bad.write_text(json.dumps({"game": {"n": 3, "k": 2, "distribution": {"kind": "pareto", "params": [1, 2]}}, "strategy": "cbn-eq"}))
    assert main(["simulate", "--config", str(bad)]) == EXIT_CONFIG
    bad.write_text("{")
    assert main(["simulate", "--config", str(bad)]) == EXIT_CONFIG
    assert "configuration error" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "waitline", "simulate", "--config", str(CONFIGS / "queue-full-entry-cost.json"), "--out", str(tmp_path), "--runs", "1000"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert json.loads((tmp_path / "summary.json").read_text())["efficiency_frequency"] == 1.0
