"""Command-line pipeline: train, decompose, gamma, vulnerability, report.

Artifacts live under ``--out-dir``::

    runs/<run>/<k>.json          trained profiles (with their Nash gap)
    decompositions/<run>.json    SGDecompose output per run
    decompositions/game.json     exact LP decomposition of the game
    vulnerability/<run>.json     cross-play vulnerability and diversity per run
    report.csv, report.json      per-run table and summary statistics

Run seeds are derived from the master seed with
``numpy.random.SeedSequence([master, run, k])`` (first 64-bit word of its
generated state), so every (run, k) pair gets an independent stream.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import analysis
from .exactdecomp import compute_gamma, min_delta_nf, min_delta_perfect_info
from .games import build_builtin, induced_normal_form, total_variation
from .games.efg import ExtensiveFormGame
from .games.nf import NormalFormGame
from .polymatrix import PolymatrixGame, offense_defense_polymatrix
from .regret import load_run, save_run, train
from .sgdecompose import Neighborhood, SGConfig, sg_decompose

log = logging.getLogger("polyvuln")

EXIT_OK, EXIT_RUNTIME, EXIT_VALIDATION = 0, 1, 2

DEFAULTS = {
    "game": "kuhn_poker",
    "params": {},
    "algorithm": "cfr+",
    "runs": 1,
    "per_run": 2,
    "iterations": 1000,
    "seed": 0,
    "out_dir": "out",
    "jobs": 1,
    "mode": "sgd",
    "sgd": {},
}

REPORT_COLUMNS = ["run", "delta", "gamma", "bound", "vulnerability", "ratio", "tv_max"]


class ArtifactError(RuntimeError):
    """A required input artifact is missing or unreadable."""


def derive_seed(master: int, run: int, k: int) -> int:
    """Independent 64-bit seed for strategy ``k`` of run ``run``."""
    return int(np.random.SeedSequence([master, run, k]).generate_state(1, dtype=np.uint64)[0])


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


def load_config(args) -> dict:
    cfg = json.loads(json.dumps(DEFAULTS))
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text())
        except FileNotFoundError as exc:
            raise ValueError(f"config file not found: {args.config}") from exc
        except json.JSONDecodeError as exc:
            raise ValueError(f"config file is not valid JSON: {exc}") from exc
        unknown = set(doc) - set(DEFAULTS)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(doc)
    for key in ("game", "algorithm", "runs", "per_run", "iterations", "seed", "out_dir", "jobs", "mode"):
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    for key in ("beta", "players", "dealer"):
        val = getattr(args, key, None)
        if val is not None:
            cfg["params"][key] = val
    sgd = dict(cfg.get("sgd") or {})
    for flag, key in (("lam", "lam"), ("batch_size", "batch_size"), ("epochs", "epochs"),
                      ("lr_start", "lr_start"), ("lr_floor", "lr_floor"),
                      ("lr_halve_every", "lr_halve_every")):
        val = getattr(args, flag, None)
        if val is not None:
            sgd[key] = val
    cfg["sgd"] = sgd
    if cfg["runs"] < 1 or cfg["per_run"] < 1:
        raise ValueError("runs and per_run must be at least 1")
    if cfg["iterations"] < 1:
        raise ValueError("iterations must be at least 1")
    if cfg["jobs"] < 1:
        raise ValueError("jobs must be at least 1")
    return cfg


def make_game(cfg):
    return build_builtin(cfg["game"], **cfg["params"])


def make_efg(cfg) -> ExtensiveFormGame:
    g = make_game(cfg)
    if isinstance(g, NormalFormGame):
        g = build_builtin(cfg["game"], form="efg", **cfg["params"])
    return g


def _write_json(path: Path, doc) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=1))


def _run_dirs(out: Path) -> list[Path]:
    root = out / "runs"
    dirs = sorted((d for d in root.glob("*") if d.is_dir() and d.name.isdigit()), key=lambda d: int(d.name))
    if not dirs:
        raise ArtifactError(f"no trained runs under {root}; run 'train' first")
    return dirs


def _load_profiles(g, run_dir: Path):
    files = sorted(run_dir.glob("*.json"), key=lambda p: int(p.stem))
    if not files:
        raise ArtifactError(f"no profiles in {run_dir}")
    return [load_run(f, g) for f in files]


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _train_one(job):
    cfg, run, k = job
    g = make_efg(cfg)
    seed = derive_seed(cfg["seed"], run, k)
    result = train(g, cfg["algorithm"], cfg["iterations"], seed)
    path = Path(cfg["out_dir"]) / "runs" / str(run) / f"{k}.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    save_run(path, g, result)
    return run, k, result.nash_gap


def cmd_train(cfg) -> int:
    make_efg(cfg)  # validate the game before spawning workers
    jobs = [(cfg, r, k) for r in range(cfg["runs"]) for k in range(cfg["per_run"])]
    if cfg["jobs"] > 1:
        with ProcessPoolExecutor(cfg["jobs"]) as pool:
            results = list(pool.map(_train_one, jobs))
    else:
        results = [_train_one(j) for j in jobs]
    for run, k, gap in results:
        print(f"run {run} strategy {k}: nash_gap={gap:.6g}")
    return EXIT_OK


def cmd_decompose(cfg) -> int:
    out = Path(cfg["out_dir"])
    mode = cfg["mode"]
    g = make_game(cfg)
    if mode == "lp-nf":
        nf = g if isinstance(g, NormalFormGame) else induced_normal_form(g)
        res = min_delta_nf(nf)
        res.params = dict(cfg["params"])
        _write_json(out / "decompositions" / "game.json", res.to_json())
        print(f"delta={res.delta:.6g}")
        return EXIT_OK
    if mode == "lp-efg":
        if isinstance(g, NormalFormGame):
            g = build_builtin(cfg["game"], form="efg", **cfg["params"])
        if not g.is_perfect_information():
            raise ValueError("lp-efg needs a perfect-information game")
        res = min_delta_perfect_info(g)
        _write_json(out / "decompositions" / "game.json", res.to_json())
        print(f"delta={res.delta:.6g}")
        return EXIT_OK
    if mode != "sgd":
        raise ValueError(f"unknown decomposition mode {mode!r}")
    g = make_efg(cfg)
    sg_cfg = SGConfig(**{**cfg["sgd"], "seed": cfg["seed"]})
    for run_dir in _run_dirs(out):
        runs = _load_profiles(g, run_dir)
        res = sg_decompose(g, Neighborhood([r.profile for r in runs]), sg_cfg)
        meta = {"delta": res.delta, "gamma": res.gamma, "method": "sgd", "game": g.name,
                "params": dict(cfg["params"]), "config": sg_cfg.to_json(),
                "profiles": [f"{run_dir.name}/{k}.json" for k in range(len(runs))],
                "loss_history": res.history}
        doc = res.decomposition.to_json()
        doc["metadata"] = meta
        _write_json(out / "decompositions" / f"{run_dir.name}.json", doc)
        print(f"run {run_dir.name}: delta={res.delta:.6g} gamma={res.gamma:.6g}")
    return EXIT_OK


def cmd_gamma(cfg) -> int:
    out = Path(cfg["out_dir"])
    g = make_game(cfg)
    if cfg["game"] == "offense_defense":
        pm = offense_defense_polymatrix(**cfg["params"])
        delta = 0.0
    else:
        nf = g if isinstance(g, NormalFormGame) else induced_normal_form(g)
        res = min_delta_nf(nf)
        pm, delta = res.game, res.delta
    assert isinstance(pm, PolymatrixGame)
    gamma = compute_gamma(pm)
    _write_json(out / "gamma.json", {"game": cfg["game"], "params": cfg["params"],
                                      "delta": delta, "gamma": gamma})
    print(f"gamma={gamma:.6g} delta={delta:.6g}")
    return EXIT_OK


def run_vulnerability(g: ExtensiveFormGame, profiles) -> dict:
    """Cross-play vulnerability and diversity of one run's profiles."""
    n = g.num_players
    sets = [[p[i] for p in profiles] for i in range(n)]
    per_player = [0.0] * n
    for p in profiles:
        for i in range(n):
            per_player[i] = max(per_player[i], analysis.vulnerability_finite(g, i, p, sets))
    tv = 0.0
    for a in range(len(profiles)):
        for b in range(a + 1, len(profiles)):
            tv = max(tv, total_variation(g, profiles[a], profiles[b]))
    return {"vulnerability": max(per_player), "per_player": per_player, "tv_max": tv}


def cmd_vulnerability(cfg) -> int:
    out = Path(cfg["out_dir"])
    g = make_efg(cfg)
    for run_dir in _run_dirs(out):
        profiles = [r.profile for r in _load_profiles(g, run_dir)]
        doc = run_vulnerability(g, profiles)
        _write_json(out / "vulnerability" / f"{run_dir.name}.json", doc)
        print(f"run {run_dir.name}: vulnerability={doc['vulnerability']:.6g} tv_max={doc['tv_max']:.6g}")
    return EXIT_OK


def _summary(values):
    arr = np.array([v for v in values if v is not None], dtype=float)
    if arr.size == 0:
        return {"min": None, "mean": None, "max": None, "stderr": None}
    se = float(arr.std(ddof=1) / np.sqrt(arr.size)) if arr.size > 1 else 0.0
    return {"min": float(arr.min()), "mean": float(arr.mean()), "max": float(arr.max()), "stderr": se}


def cmd_report(cfg) -> int:
    out = Path(cfg["out_dir"])
    runs = _run_dirs(out)
    rows = []
    n = make_efg(cfg).num_players
    for run_dir in runs:
        dpath = out / "decompositions" / f"{run_dir.name}.json"
        vpath = out / "vulnerability" / f"{run_dir.name}.json"
        for p in (dpath, vpath):
            if not p.exists():
                raise ArtifactError(f"missing artifact {p}; run 'decompose' and 'vulnerability' first")
        meta = json.loads(dpath.read_text())["metadata"]
        vul = json.loads(vpath.read_text())
        b = analysis.loose_bound(n, meta["gamma"], meta["delta"])
        v = vul["vulnerability"]
        rows.append({"run": int(run_dir.name), "delta": meta["delta"], "gamma": meta["gamma"],
                     "bound": b, "vulnerability": v, "ratio": b / v if v > 0 else None,
                     "tv_max": vul["tv_max"]})
    with open(out / "report.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=REPORT_COLUMNS)
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if r[k] is None else (r[k] if k == "run" else f"{r[k]:.10g}"))
                        for k in REPORT_COLUMNS})
    summary = {k: _summary([r[k] for r in rows]) for k in REPORT_COLUMNS if k != "run"}
    _write_json(out / "report.json", {"runs": len(rows), "summary": summary})
    print((out / "report.csv").read_text(), end="")
    return EXIT_OK


COMMANDS = {"train": cmd_train, "decompose": cmd_decompose, "gamma": cmd_gamma,
            "vulnerability": cmd_vulnerability, "report": cmd_report}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment configuration")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--out-dir", dest="out_dir", help="artifact directory")
    common.add_argument("--jobs", type=int, help="worker processes for training")
    common.add_argument("--game", help="builtin game name")
    common.add_argument("--beta", type=float, help="game parameter beta")
    common.add_argument("--players", type=int, help="player count for poker games")
    common.add_argument("--dealer", choices=["player", "chance"], help="bad_card dealer model")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="polyvuln", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("train", parents=[common], help="multi-seed self-play training")
    p.add_argument("--algorithm", choices=["cfr", "cfr+"])
    p.add_argument("--runs", type=int)
    p.add_argument("--per-run", dest="per_run", type=int, help="strategies per run")
    p.add_argument("--iterations", type=int)
    p = sub.add_parser("decompose", parents=[common], help="fit a constant-sum decomposition")
    p.add_argument("--mode", choices=["lp-nf", "lp-efg", "sgd"])
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr-start", dest="lr_start", type=float)
    p.add_argument("--lr-floor", dest="lr_floor", type=float)
    p.add_argument("--lr-halve-every", dest="lr_halve_every", type=int)
    sub.add_parser("gamma", parents=[common], help="subgame-stability gamma via LP")
    sub.add_parser("vulnerability", parents=[common], help="cross-play vulnerability per run")
    sub.add_parser("report", parents=[common], help="CSV/JSON report over runs")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args)
        return COMMANDS[args.command](cfg)
    except ArtifactError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (ValueError, TypeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
