"""Acceptance criteria 1-8, one PASS/FAIL line each, with wall-clock limits."""

import time

import numpy as np
import pytest

from waitline.beliefs import ParticleBank, belief_trace, detect_sudden_bad_news
from waitline.dist import Pareto, Uniform
from waitline.engine import Draws, GameConfig, run_batch, simulate
from waitline.entrycost import corollary2_comparison, queue_full_equilibrium, reserve_value
from waitline.equilibria import beta_trivial, cbn_b_i, cbn_b_nn, cbn_b_yn, cbn_gamma, CBN_TAU
from waitline.policies import ContinuousBadNews, FixedTime, FixedTimeAndState, FullRevelation, Trivial
from waitline.strategies import CbnEq, Deviation, Lottery, RushReactor, Truthful, TrivialEq
from waitline.verify import (
    best_response_search,
    cbn_conditional_payment,
    payoff_equivalence_check,
    pi_D,
    pi_D_derivative,
    pi_U,
    pi_U_gap_at_top,
    transfer_identity_residual,
)
from waitline.welfare import assortative_top_k, random_proportional, summarize, virtual_surplus

U = Uniform()
GAME = GameConfig(3, 2, U, seed=2024)
EQ = TrivialEq(3, 2, U)


@pytest.fixture
def report(capsys):
    def emit(number, title, checks, elapsed, limit):
        ok = all(passed for _, passed in checks) and elapsed < limit
        failed = [name for name, passed in checks if not passed]
        detail = "; ".join(failed) if failed else "all checks"
        with capsys.disabled():
            print(f"\nCRITERION {number} {'PASS' if ok else 'FAIL'}: {title} [{elapsed:.1f}s < {limit:g}s] {detail}")
        assert not failed, failed
        assert elapsed < limit, f"took {elapsed:.1f}s"

    return emit


def test_criterion_1_benchmark_bid(report):
    t0 = time.perf_counter()
    v = np.linspace(0, 1, 101)
    closed = v * (3 - 2 * v) / (3 * (2 - v))
    err = float(np.max(np.abs(beta_trivial(v, 3, 2, U) - closed)))
    checks = [
        (f"max error {err:.2e} < 1e-10", err < 1e-10),
        ("beta(1/2) == 2/9 exactly", beta_trivial(0.5, 3, 2, U) == 2 / 9),
        ("b_I(1/2) = b_NN(1/2) = tau", cbn_b_i(0.5) == pytest.approx(CBN_TAU, abs=1e-15) and cbn_b_nn(0.5) == pytest.approx(CBN_TAU, abs=1e-15)),
    ]
    report(1, "benchmark bid closed form", checks, time.perf_counter() - t0, 1)


def test_criterion_2_identity_suite(report):
    t0 = time.perf_counter()
    grid = np.linspace(0, 0.5, 501)
    resid = float(np.max(np.abs(transfer_identity_residual(grid))))
    checks = [
        (f"transfer residual {resid:.1e} < 1e-9", resid < 1e-9),
        ("gamma(1/2) = 6.5", abs(cbn_gamma(0.5) - 6.5) < 1e-12),
        ("b_YN(1/2) = 1/6", abs(cbn_b_yn(0.5) - 1 / 6) < 1e-12),
    ]
    for v in (0.1, 0.25, 0.4):
        gap = pi_U(0.5, v) - pi_U(v, v)
        checks.append((f"upward gap at v={v}", abs(gap + (1 - 2 * v) ** 2 * (2 - v) / 12) < 1e-9))
    h, worst, lowest = 1e-5, 0.0, np.inf
    for v in np.linspace(0.05, 0.5, 10):
        for vp in np.linspace(0.01, 0.99, 15) * v:
            closed = pi_D_derivative(vp, v)
            fd = (pi_D(vp + h, v) - pi_D(vp - h, v)) / (2 * h)
            worst = max(worst, abs(fd - closed) / abs(closed))
            lowest = min(lowest, closed)
    checks += [("downward derivative positive", lowest > 0), (f"finite-difference rel error {worst:.1e} < 1e-4", worst < 1e-4)]
    report(2, "good-news identity suite", checks, time.perf_counter() - t0, 10)


VALUES = np.linspace(0, 1, 21)
DEVIATIONS = list(np.round(np.linspace(-0.1, 0.1, 19), 12)) + [(0.0, "join_any"), (0.0, "never")]


@pytest.mark.slow
def test_criterion_3_equilibrium_certification(report):
    t0 = time.perf_counter()
    cbn = best_response_search(GAME, ContinuousBadNews(), CbnEq(), VALUES, DEVIATIONS, 100_000, epsilon_se=4.0)
    triv = best_response_search(GAME, Trivial(), EQ, VALUES, DEVIATIONS, 100_000, epsilon_se=4.0)
    truth = best_response_search(GAME, Trivial(), Truthful(), VALUES, DEVIATIONS, 100_000, epsilon_se=4.0)
    checks = [
        (f"cbn-eq certified (max gain {cbn.max_gain:.2e}, failing {cbn.failing_cells()[:3]})", cbn.certified),
        (f"trivial-eq certified (max gain {triv.max_gain:.2e})", triv.certified),
        (f"truthful rejected (max gain {truth.max_gain:.3f} at {truth.argmax})", not truth.certified),
        ("grids are 21 x 21", cbn.mean_gain.shape == (21, 21)),
    ]
    report(3, "equilibrium certification", checks, time.perf_counter() - t0, 600)


def test_criterion_4_rush_breaks_efficiency(report):
    t0 = time.perf_counter()
    rush = RushReactor(EQ, 2)
    full = run_batch(GAME, FullRevelation(), rush, 100_000)
    fixed = run_batch(GAME, FixedTime(0.2), rush, 100_000)
    trivial = run_batch(GAME, Trivial(), EQ, 100_000)
    checks = [
        (f"full revelation efficiency {full.efficiency_frequency:.4f} < 1", full.efficiency_frequency < 1),
        ("full revelation rushes recorded", full.rush_frequency > 0),
        (f"fixed time efficiency {fixed.efficiency_frequency:.4f} < 1", fixed.efficiency_frequency < 1),
        ("fixed time rushes recorded", fixed.rush_frequency > 0),
        (f"trivial efficiency {trivial.efficiency_frequency} == 1", trivial.efficiency_frequency == 1.0),
        ("trivial has no rushes", trivial.rush_frequency == 0),
    ]
    report(4, "information causes rushes", checks, time.perf_counter() - t0, 60)


def _histories(policy, strat, count, seed, keep=lambda h: True):
    b = simulate(GAME, policy, strat, Draws.draw(np.random.default_rng(seed), 40 * count, 3))
    out = []
    for i in range(len(b)):
        h = b.history(i)
        if keep(h):
            out.append(h)
            if len(out) == count:
                break
    assert len(out) == count
    return out


def test_criterion_5_sudden_bad_news_detector(report):
    t0 = time.perf_counter()
    times = np.linspace(1, 0, 21)
    misses = {"full revelation": 0, "fixed time and state": 0, "trivial": 0, "good-news signal": 0}

    for h in _histories(FullRevelation(), EQ, 250, 1):
        tr = belief_trace(GAME, FullRevelation(), EQ, h, times=times)
        # every message that leaves a positive count is a drop in remaining items
        expected = [(m.time, m.depth + 1) for m in h.messages if m.payload.count < GAME.k]
        misses["full revelation"] += detect_sudden_bad_news(tr) != expected

    fts = FixedTimeAndState(0.2, 1, "below")
    bank = ParticleBank.build(GAME, fts, EQ, 20_000, np.random.default_rng(2))
    silent = 0
    for h in _histories(fts, EQ, 250, 3):
        tr = belief_trace(GAME, fts, EQ, h, bank=bank, times=times)
        expected = [] if h.messages else [(0.2, 1)]
        silent += not h.messages
        misses["fixed time and state"] += detect_sudden_bad_news(tr, z=3) != expected

    for h in _histories(Trivial(), EQ, 250, 4):
        tr = belief_trace(GAME, Trivial(), EQ, h, times=times)
        misses["trivial"] += detect_sudden_bad_news(tr) != []

    cbn = ContinuousBadNews()
    bank = ParticleBank.build(GAME, cbn, CbnEq(), 10_000, np.random.default_rng(5))
    skipped = 0
    for h in _histories(cbn, CbnEq(), 250, 6, keep=lambda h: bool(h.messages)):
        tr = belief_trace(GAME, cbn, CbnEq(), h, bank=bank, times=times, strict=False)
        skipped += bool(tr.skipped)
        misses["good-news signal"] += detect_sudden_bad_news(tr, z=3) != []

    checks = [(f"{name}: {m} of 250 traces misclassified", m == 0) for name, m in misses.items()]
    checks += [(f"silent-at-tau paths exercised ({silent})", silent > 0), (f"no unresolved good-news stages ({skipped})", skipped == 0)]
    report(5, "sudden-bad-news detector over 1000 traces", checks, time.perf_counter() - t0, 60)


def test_criterion_6_welfare_direction(report):
    t0 = time.perf_counter()
    P = Pareto(1, 2)
    est = {
        ("uniform", "ae"): virtual_surplus(assortative_top_k(2, 1, U), 2, U),
        ("uniform", "random"): virtual_surplus(random_proportional(2, 1), 2, U),
        ("pareto", "ae"): virtual_surplus(assortative_top_k(2, 1, P), 2, P),
        ("pareto", "random"): virtual_surplus(random_proportional(2, 1), 2, P),
    }
    exact = {("uniform", "ae"): 1 / 3, ("uniform", "random"): 1 / 2, ("pareto", "ae"): 4 / 3, ("pareto", "random"): 1.0}
    checks = [(f"{k} integral {v:.10f} vs {exact[k]:.10f}", abs(v - exact[k]) < 1e-8) for k, v in est.items()]
    checks += [
        ("uniform: assortative below random", est[("uniform", "ae")] < est[("uniform", "random")]),
        ("pareto: assortative above random", est[("pareto", "ae")] > est[("pareto", "random")]),
    ]
    sims = {
        ("uniform", "ae"): (GameConfig(2, 1, U), TrivialEq(2, 1, U)),
        ("uniform", "random"): (GameConfig(2, 1, U), Lottery(0.0)),
        ("pareto", "ae"): (GameConfig(2, 1, P), TrivialEq(2, 1, P)),
        ("pareto", "random"): (GameConfig(2, 1, P), Lottery(1.0)),  # all enter at the support start
    }
    for i, (key, (cfg, strat)) in enumerate(sims.items()):
        rep = summarize(simulate(cfg, Trivial(), strat, Draws.draw(np.random.default_rng(100 + i), 400_000, 2)))
        z = abs(rep.total_surplus - exact[key]) / rep.total_surplus_se
        checks.append((f"{key} simulated {rep.total_surplus:.4f} within 3 SE (z={z:.2f})", z < 3))
    report(6, "hazard rate decides the welfare ranking", checks, time.perf_counter() - t0, 60)


def test_criterion_7_entry_cost(report):
    t0 = time.perf_counter()
    vr = reserve_value(0.25, 2, 1, U)
    grid = np.linspace(0.01, 0.99, 50)
    above = all(reserve_value(c, n, k, U) > c for c in grid for n, k in ((2, 1), (3, 2), (4, 2)))
    e = queue_full_equilibrium(0.25, 3, 2, U)
    qf = run_batch(GameConfig(3, 2, U, entry_cost=0.25), e.policy, e.strategy, 100_000)
    table = corollary2_comparison(0.2, 3, 2, Pareto(1, 2))
    s = {r.policy_label: r.surplus for r in table.rows}
    checks = [
        (f"reserve value {vr!r} = 0.5", abs(vr - 0.5) < 1e-10),
        ("reserve value above cost on the grid", above),
        (f"queue-full efficiency {qf.efficiency_frequency}", qf.efficiency_frequency == 1.0),
        (f"queue-full {s['queue-full']:.4f} > trivial {s['trivial']:.4f}", s["queue-full"] > s["trivial"]),
        (f"queue-full > rush {s['rush']:.4f}", s["queue-full"] > s["rush"]),
        ("decreasing hazard prediction matched", all(r.prediction_matched for r in table.rows)),
    ]
    report(7, "entry cost and full-line disclosure", checks, time.perf_counter() - t0, 300)


def test_criterion_8_payoff_equivalence(report):
    t0 = time.perf_counter()
    triv = payoff_equivalence_check(GAME, Trivial(), EQ, 100_000)
    cbn = payoff_equivalence_check(GAME, ContinuousBadNews(), CbnEq(), 100_000, reference=cbn_conditional_payment)
    bumped = payoff_equivalence_check(GAME, Trivial(), Deviation(EQ, 0.05), 100_000)
    cbn_bumped = payoff_equivalence_check(GAME, ContinuousBadNews(), Deviation(CbnEq(), 0.05), 100_000, reference=cbn_conditional_payment)
    checks = [
        (f"trivial-eq: {triv.describe()}", triv.passed),
        (f"cbn-eq: {cbn.describe()}", cbn.passed),
        (f"+0.05 on trivial-eq detected, gap {bumped.max_abs_gap:.4f} > 0.04", (not bumped.passed) and bumped.max_abs_gap > 0.04),
        (f"+0.05 on cbn-eq detected, gap {cbn_bumped.max_abs_gap:.4f} > 0.04", (not cbn_bumped.passed) and cbn_bumped.max_abs_gap > 0.04),
    ]
    report(8, "payoff equivalence", checks, time.perf_counter() - t0, 120)
