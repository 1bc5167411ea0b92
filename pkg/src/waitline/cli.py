"""Command-line experiment runner.

    waitline simulate --config configs/trivial.json --out results/
    waitline verify   --config configs/appendix-d.json
    waitline welfare  --config configs/welfare-sweep.json

A config is one JSON object::

    {
      "game":     {"n": 3, "k": 2, "distribution": {"kind": "uniform", "params": [0, 1]},
                   "entry_cost": null},
      "policy":   {"policy": "trivial", "params": {}},
      "strategy": {"profile": "trivial-eq"},
      "runs": 100000, "seed": 42, "output": "results/trivial", "format": "csv"
    }

plus optional ``beliefs``, ``verify`` and ``welfare`` sections read by the
matching subcommand. The seed comes from ``--seed``, else the ``SEED``
environment variable, else the config. Every output file starts with the
config hash and seed. Exit status: 0 success, 1 a check failed, 2 the
configuration is unusable.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import dist, equilibria as eq, policies, verify, welfare
from .beliefs import ParticleBank, belief_trace, detect_sudden_bad_news, trace_to_csv
from .engine import GameConfig, OutcomeSummary, dumps, outcome_to_json, outcomes_to_csv, simulate_runs, BatchResult
from .entrycost import NoEntryError, TrivialEntryEq, corollary2_comparison
from .strategies import CbnEq, Deviation, Lottery, ReserveEq, RushReactor, StrategyProfile, Truthful, TrivialEq

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "build_profile", "PROFILES", "main"]

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2
PROFILES = ("trivial-eq", "cbn-eq", "reserve-eq", "rush-reactor", "truthful", "lottery")


class ConfigError(ValueError):
    """The configuration cannot be turned into an experiment."""


@dataclass
class ExperimentConfig:
    game: GameConfig
    policy: policies.Policy
    strategy: dict
    runs: int
    output: Path
    format: str
    seed: int
    raw: dict = field(default_factory=dict)

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.raw, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def header(self) -> list:
        return [f"config_hash: {self.config_hash}", f"seed: {self.seed}"]

    def provenance(self) -> dict:
        return {"config_hash": self.config_hash, "seed": self.seed}


def _is_cbn_game(game: GameConfig) -> bool:
    F = game.F
    return game.n == 3 and game.k == 2 and isinstance(F, dist.Uniform) and F.lo == 0.0 and F.hi == 1.0


def build_profile(desc, game: GameConfig) -> StrategyProfile:
    """Named profile, optionally with every planned entry time shifted.

    ``desc`` is a name or ``{"profile": name, "base": name, "shift": x,
    "reaction": r}``; ``base`` applies to ``rush-reactor``.
    """
    if isinstance(desc, str):
        desc = {"profile": desc}
    if not isinstance(desc, dict) or "profile" not in desc:
        raise ConfigError("strategy must be a profile name or an object with a 'profile' key")
    name = str(desc["profile"])
    n, k, F, c = game.n, game.k, game.F, game.entry_cost
    if name == "trivial-eq":
        strat = TrivialEq(n, k, F) if c is None else TrivialEntryEq(c, n, k, F)
    elif name == "cbn-eq":
        if not _is_cbn_game(game) or c is not None:
            raise ConfigError("cbn-eq needs n=3, k=2, values uniform on [0, 1] and no entry cost")
        strat = CbnEq()
    elif name == "reserve-eq":
        if c is None:
            raise ConfigError("reserve-eq needs an entry cost")
        strat = ReserveEq(c, n, k, F)
    elif name == "rush-reactor":
        base = build_profile({"profile": desc.get("base", "trivial-eq")}, game).default
        strat = RushReactor(base, k)
    elif name == "truthful":
        strat = Truthful()
    elif name == "lottery":
        strat = Lottery(float(desc.get("at", 0.0)))
    else:
        raise ConfigError(f"unknown strategy profile {name!r}; choose from {', '.join(PROFILES)}")
    shift = float(desc.get("shift", 0.0))
    reaction = str(desc.get("reaction", "obey"))
    if shift or reaction != "obey":
        strat = Deviation(strat, shift, reaction)
    return StrategyProfile(strat)


def _resolve_seed(cli_seed: Optional[int], cfg_seed) -> int:
    if cli_seed is not None:
        return int(cli_seed)
    env = os.environ.get("SEED")
    if env not in (None, ""):
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"SEED environment variable {env!r} is not an integer") from None
    return int(cfg_seed)


def load_config(path, overrides: Optional[dict] = None) -> ExperimentConfig:
    """Read and validate a JSON config; ``overrides`` holds command-line values."""
    overrides = overrides or {}
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    try:
        g = raw["game"]
        F = dist.from_config(g["distribution"])
        game_seed = _resolve_seed(overrides.get("seed"), raw.get("seed", 0))
        game = GameConfig(int(g["n"]), int(g["k"]), F, g.get("entry_cost"), game_seed)
        policy = policies.from_config(raw.get("policy", {"policy": "trivial"}))
    except KeyError as e:
        raise ConfigError(f"missing config field {e}") from None
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from None
    runs = overrides.get("runs") or raw.get("runs", 1000)
    if int(runs) < 1:
        raise ConfigError("runs must be at least 1")
    fmt = overrides.get("format") or raw.get("format", "csv")
    if fmt not in ("csv", "json"):
        raise ConfigError("format must be csv or json")
    out = overrides.get("out") or raw.get("output", "results")
    strategy = raw.get("strategy", "trivial-eq")
    effective = dict(raw, seed=game_seed, runs=int(runs), format=fmt)
    if overrides.get("particles"):
        effective.setdefault("beliefs", {})
        effective["beliefs"] = dict(effective["beliefs"], particles=int(overrides["particles"]))
    cfg = ExperimentConfig(game, policy, strategy, int(runs), Path(out), fmt, game_seed, effective)
    try:
        build_profile(strategy, game)  # fail early on bad profiles
    except ConfigError:
        raise
    except ValueError as e:  # e.g. no type recoups the entry cost
        raise ConfigError(str(e)) from None
    if game_seed < 0:
        raise ConfigError("seed must be a nonnegative integer")
    return cfg


# ---------------------------------------------------------------------------
# simulate


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def cmd_simulate(cfg: ExperimentConfig) -> int:
    profile = build_profile(cfg.strategy, cfg.game)
    parts = [b for _, b in simulate_runs(cfg.game, cfg.policy, profile, cfg.runs, cfg.seed)]
    batch = BatchResult.concat(parts)
    summary = OutcomeSummary.from_batch(batch)
    outcomes = [batch.outcome(i) for i in range(len(batch))]
    rush_events = sum(len(o.rush_events) for o in outcomes)
    info = dict(cfg.provenance(), strategy=profile.name, policy=policies.to_config(cfg.policy), **summary.to_dict(), rush_events=rush_events)
    _write(cfg.output / "summary.json", dumps(info) + "\n")
    if cfg.format == "csv":
        buf = io.StringIO()
        outcomes_to_csv(outcomes, buf, cfg.header())
        _write(cfg.output / "outcomes.csv", buf.getvalue())
        buf = io.StringIO()
        for line in cfg.header():
            buf.write(f"# {line}\n")
        buf.write("run_id,time,depth,rushers,slots\n")
        for i, o in enumerate(outcomes):
            for r in o.rush_events:
                buf.write(f"{i},{r.time!r},{r.depth},{' '.join(map(str, r.rushers))},{r.slots}\n")
        _write(cfg.output / "rush_events.csv", buf.getvalue())
    else:
        doc = dict(cfg.provenance(), outcomes=[outcome_to_json(o, i) for i, o in enumerate(outcomes)])
        _write(cfg.output / "outcomes.json", dumps(doc) + "\n")
    bel = cfg.raw.get("beliefs")
    if bel:
        run = int(bel.get("run", 0))
        if not 0 <= run < len(batch):
            raise ConfigError(f"beliefs.run {run} outside the simulated runs")
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1]))
        trace = belief_trace(
            cfg.game, cfg.policy, profile, batch.history(run), particles=int(bel.get("particles", 20000)), rng=rng, strict=False
        )
        buf = io.StringIO()
        events = detect_sudden_bad_news(trace, z=float(bel.get("z", 3.0))) if len(trace) else []
        header = cfg.header() + [f"run: {run}", f"sudden_bad_news: {events}"]
        trace_to_csv(trace, buf, header)
        _write(cfg.output / "beliefs.csv", buf.getvalue())
    print(f"{cfg.runs} runs, efficiency {summary.efficiency_frequency:.6f}, surplus {summary.mean_surplus:.6f} -> {cfg.output}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify


def _appendix_d_checks() -> list:
    grid = np.linspace(0.0, 0.5, 501)
    checks = []

    def add(name, value, ok):
        checks.append({"check": name, "value": float(value), "passed": bool(ok)})

    resid = float(np.max(np.abs(verify.transfer_identity_residual(grid))))
    add("transfer identity max residual", resid, resid < 1e-9)
    add("gamma(1/2)", eq.cbn_gamma(0.5), abs(eq.cbn_gamma(0.5) - 6.5) < 1e-12)
    add("b_YN(1/2)", eq.cbn_b_yn(0.5), abs(eq.cbn_b_yn(0.5) - 1 / 6) < 1e-12)
    add("b_I(1/2) = b_NN(1/2) = tau", eq.cbn_b_nn(0.5), abs(eq.cbn_b_i(0.5) - eq.CBN_TAU) < 1e-12 and abs(eq.cbn_b_nn(0.5) - eq.CBN_TAU) < 1e-12)
    for v in (0.1, 0.25, 0.4):
        gap = verify.pi_U(0.5, v) - verify.pi_U(v, v)
        add(f"upward gap at v={v}", gap, abs(gap - verify.pi_U_gap_at_top(v)) < 1e-9 and gap < 0)
    worst_rel, min_deriv = 0.0, math.inf
    h = 1e-5
    for v in np.linspace(0.05, 0.5, 10):
        for vp in np.linspace(0.02, 0.98, 9) * v:
            closed = verify.pi_D_derivative(vp, v)
            fd = (verify.pi_D(vp + h, v) - verify.pi_D(vp - h, v)) / (2 * h)
            worst_rel = max(worst_rel, abs(closed - fd) / abs(closed))
            min_deriv = min(min_deriv, closed)
    add("downward derivative min", min_deriv, min_deriv > 0)
    add("downward derivative closed vs finite difference (rel)", worst_rel, worst_rel < 1e-4)
    return checks


def _grid(desc, default_lo, default_hi, default_size):
    if desc is None:
        return [float(x) for x in np.round(np.linspace(default_lo, default_hi, default_size), 12)]
    if isinstance(desc, list):
        return desc
    lo, hi = float(desc.get("lo", default_lo)), float(desc.get("hi", default_hi))
    return [float(x) for x in np.round(np.linspace(lo, hi, int(desc.get("size", default_size))), 12)]


def _deviation_grid(desc) -> list:
    if desc is None:
        desc = {}
    if isinstance(desc, list):
        return [tuple(d) if isinstance(d, list) else d for d in desc]
    shifts = _grid(desc.get("shifts"), -0.1, 0.1, 19)
    return shifts + [(0.0, r) for r in desc.get("reactions", ["join_any", "never"])]


def _reference(name, game):
    if name in (None, "benchmark"):
        return None
    if name == "good_news":
        if not _is_cbn_game(game):
            raise ConfigError("the good_news reference needs the n=3, k=2, U[0,1] game")
        return verify.cbn_conditional_payment
    raise ConfigError(f"unknown payment reference {name!r}")


def cmd_verify(cfg: ExperimentConfig) -> int:
    section = cfg.raw.get("verify", {})
    suites = section.get("suites", ["appendix_d"])
    profile = build_profile(cfg.strategy, cfg.game)
    failed = []
    report = dict(cfg.provenance(), suites={})
    for suite in suites:
        if suite == "appendix_d":
            checks = _appendix_d_checks()
            report["suites"]["appendix_d"] = checks
            failed += [f"appendix_d: {c['check']} = {c['value']:.3g}" for c in checks if not c["passed"]]
        elif suite == "payoff_equivalence":
            opts = section.get("payoff_equivalence", {})
            res = verify.payoff_equivalence_check(
                cfg.game, cfg.policy, profile, int(opts.get("runs", cfg.runs)), _reference(opts.get("reference"), cfg.game), int(opts.get("bins", 10)), cfg.seed
            )
            buf = io.StringIO()
            for line in cfg.header():
                buf.write(f"# {line}\n")
            buf.write("bin_lo,bin_hi,winners,mean_payment,reference,gap,std_err,within\n")
            for b in res.bins:
                buf.write(f"{b.lo!r},{b.hi!r},{b.winners},{b.mean_payment!r},{b.reference!r},{b.gap!r},{b.std_err!r},{int(b.within)}\n")
            _write(cfg.output / "payoff_equivalence.csv", buf.getvalue())
            report["suites"]["payoff_equivalence"] = {
                "efficiency_frequency": res.efficiency_frequency,
                "max_abs_gap": res.max_abs_gap,
                "passed": res.passed,
                "summary": res.describe(),
            }
            if not res.passed:
                failed.append(f"payoff_equivalence: {res.describe()}")
        elif suite == "best_response":
            opts = section.get("best_response", {})
            F = cfg.game.F
            values = _grid(opts.get("values"), F.lo, F.hi if F.bounded else float(F.quantile(0.99)), 21)
            rep = verify.best_response_search(
                cfg.game, cfg.policy, profile, values, _deviation_grid(opts.get("deviations")), int(opts.get("runs", cfg.runs)),
                float(opts.get("epsilon_se", 4.0)), cfg.seed,
            )
            buf = io.StringIO()
            rep.to_csv(buf, cfg.header())
            _write(cfg.output / "deviations.csv", buf.getvalue())
            report["suites"]["best_response"] = {"certified": rep.certified, "max_gain": rep.max_gain, "argmax": list(rep.argmax)}
            for v, d, g, s in rep.failing_cells():
                failed.append(f"best_response: value {v:.4g}, deviation {d}: gain {g:.4g} > {rep.epsilon_se:g} SE ({s:.3g})")
        else:
            raise ConfigError(f"unknown verify suite {suite!r}")
    report["passed"] = not failed
    _write(cfg.output / "verify.json", dumps(report) + "\n")
    for line in failed:
        print(f"FAIL {line}", file=sys.stderr)
    print(f"verify: {len(suites)} suite(s), {'all passed' if not failed else f'{len(failed)} failure(s)'} -> {cfg.output}")
    return EXIT_OK if not failed else EXIT_FAILED


# ---------------------------------------------------------------------------
# welfare


def _rule(desc, n, k, F):
    if desc in ("assortative", "AssortativeTopK"):
        return welfare.assortative_top_k(n, k, F)
    if desc in ("random", "RandomProportional"):
        return welfare.random_proportional(n, k)
    if isinstance(desc, dict) and "cutoff" in desc:
        return welfare.cutoff_assortative(n, k, F, float(desc["cutoff"]))
    raise ConfigError(f"unknown allocation rule {desc!r}")


WELFARE_COLUMNS = ("distribution", "n", "k", "rule_a", "rule_b", "surplus_a", "surplus_b", "ordering", "hazard_class", "prediction", "prediction_matched")


def cmd_welfare(cfg: ExperimentConfig) -> int:
    section = cfg.raw.get("welfare", {})
    mismatches = []
    buf = io.StringIO()
    for line in cfg.header():
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(WELFARE_COLUMNS)
    try:
        for row in section.get("comparisons", []):
            F = dist.from_config(row["distribution"])
            n, k = int(row.get("n", cfg.game.n)), int(row.get("k", cfg.game.k))
            a = _rule(row.get("rule_a", "assortative"), n, k, F)
            b = a if row.get("rule_b") == row.get("rule_a", "assortative") else _rule(row.get("rule_b", "random"), n, k, F)
            res = welfare.welfare_order_check(F, n, k, a, b)
            pred = "no prediction" if res.predicted is None else res.predicted.value
            matched = "" if res.matches is None else int(res.matches)
            d = row["distribution"]
            label = f"{d['kind']}({', '.join(f'{x:g}' for x in d.get('params', []))})"
            w.writerow((label, n, k, a.provenance, b.provenance, repr(res.surplus_a), repr(res.surplus_b), res.ordering.value, res.hazard.value, pred, matched))
            if res.matches is False:
                mismatches.append(f"{label}: {a.provenance} vs {b.provenance} gave {res.ordering.value}, expected {pred}")
        tables = section.get("entry_cost", [])
        if isinstance(tables, dict):
            tables = [tables]
        for i, t in enumerate(tables):
            F = dist.from_config(t.get("distribution", dist.to_config(cfg.game.F)))
            table = corollary2_comparison(float(t["c"]), int(t.get("n", cfg.game.n)), int(t.get("k", cfg.game.k)), F)
            out = io.StringIO()
            table.to_csv(out, cfg.header() + [f"c: {t['c']}", f"prediction: {table.prediction}"])
            _write(cfg.output / ("corollary2.csv" if len(tables) == 1 else f"corollary2_{i}.csv"), out.getvalue())
            mismatches += [f"entry cost {t['c']}: {r.policy_label} row does not match '{table.prediction}'" for r in table.rows if r.prediction_matched is False]
    except (KeyError, TypeError, NoEntryError) as e:
        raise ConfigError(f"bad welfare section: {e}") from None
    _write(cfg.output / "welfare.csv", buf.getvalue())
    for line in mismatches:
        print(f"FAIL {line}", file=sys.stderr)
    print(f"welfare: {'predictions matched' if not mismatches else f'{len(mismatches)} mismatch(es)'} -> {cfg.output}")
    return EXIT_OK if not mismatches else EXIT_FAILED


# ---------------------------------------------------------------------------

COMMANDS = {"simulate": cmd_simulate, "verify": cmd_verify, "welfare": cmd_welfare}


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="waitline", description="Waiting-line auction experiments.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("simulate", "play many games and write outcomes and a summary"),
        ("verify", "run equilibrium certificates"),
        ("welfare", "compare expected surplus of allocation rules"),
    ):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config", required=True, metavar="PATH")
        s.add_argument("--out", metavar="DIR")
        s.add_argument("--seed", type=int, metavar="U64")
        s.add_argument("--runs", type=int, metavar="N")
        s.add_argument("--format", choices=("csv", "json"))
        s.add_argument("--particles", type=int, metavar="N")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    overrides = {"out": args.out, "seed": args.seed, "runs": args.runs, "format": args.format, "particles": args.particles}
    try:
        cfg = load_config(args.config, overrides)
        return COMMANDS[args.command](cfg)
    except ConfigError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
