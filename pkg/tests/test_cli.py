import csv
import json
import subprocess
import sys

import pytest

from polyvuln.cli import derive_seed, main

GAME = ["--game", "tiny_hanabi"]


def _pipeline(out, jobs=1):
    base = GAME + ["--out-dir", str(out), "--seed", "7"]
    assert main(["train", *base, "--algorithm", "cfr", "--runs", "2", "--per-run", "2",
                 "--iterations", "300", "--jobs", str(jobs)]) == 0
    assert main(["decompose", *base, "--epochs", "2"]) == 0
    assert main(["vulnerability", *base]) == 0
    assert main(["report", *base]) == 0


def test_full_pipeline(tmp_path):
    _pipeline(tmp_path)
    assert sorted(p.name for p in (tmp_path / "runs").iterdir()) == ["0", "1"]
    assert (tmp_path / "runs" / "1" / "1.json").exists()
    with open(tmp_path / "report.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["run", "delta", "gamma", "bound", "vulnerability", "ratio", "tv_max"]
    assert len(rows) == 2
    summary = json.loads((tmp_path / "report.json").read_text())["summary"]
    assert set(summary["delta"]) == {"min", "mean", "max", "stderr"}
    run = json.loads((tmp_path / "runs" / "0" / "0.json").read_text())
    assert run["seed"] == derive_seed(7, 0, 0)


def test_parallel_training_matches_serial(tmp_path):
    _pipeline(tmp_path / "a", jobs=1)
    _pipeline(tmp_path / "b", jobs=2)
    for r in ("0", "1"):
        for k in ("0", "1"):
            a = json.loads((tmp_path / "a" / "runs" / r / f"{k}.json").read_text())
            b = json.loads((tmp_path / "b" / "runs" / r / f"{k}.json").read_text())
            assert a["profile"] == b["profile"]


def test_seeds_are_distinct():
    seeds = {derive_seed(0, r, k) for r in range(5) for k in range(5)}
    assert len(seeds) == 25
    assert derive_seed(1, 2, 3) == derive_seed(1, 2, 3)


def test_config_file(tmp_path):
    cfg = {"game": "kuhn_poker", "params": {"players": 2}, "algorithm": "cfr+", "runs": 1,
           "per_run": 1, "iterations": 50, "out_dir": str(tmp_path)}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    assert main(["train", "--config", str(path)]) == 0
    assert json.loads((tmp_path / "runs" / "0" / "0.json").read_text())["algorithm"] == "cfr+"


def test_gamma_and_lp_modes(tmp_path):
    assert main(["gamma", "--game", "offense_defense", "--out-dir", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "gamma.json").read_text())
    assert doc["gamma"] == pytest.approx(1.0, abs=1e-6)
    assert main(["decompose", "--game", "bad_card_pruned", "--dealer", "chance", "--mode", "lp-efg",
                 "--out-dir", str(tmp_path)]) == 0
    assert main(["decompose", "--game", "appendix_a", "--mode", "lp-nf", "--out-dir", str(tmp_path)]) == 0


def test_exit_codes(tmp_path, capsys):
    assert main(["train", "--game", "nope", "--out-dir", str(tmp_path)]) == 2
    assert main(["train", *GAME, "--runs", "0", "--out-dir", str(tmp_path)]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["train", "--config", str(bad)]) == 2
    assert main(["report", *GAME, "--out-dir", str(tmp_path / "empty")]) == 1
    assert "no trained runs" in capsys.readouterr().err
    assert main(["decompose", "--game", "kuhn_poker", "--mode", "lp-efg", "--out-dir", str(tmp_path)]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["train", "--algorithm", "sarsa"])
    assert exc.value.code == 2


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "polyvuln", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    assert "train" in out.stdout
