import io

import numpy as np
import pytest
from hypothesis import given, strategies as st

from waitline.dist import HazardClass, Pareto, Uniform, Weibull
from waitline.engine import Draws, GameConfig, efficient_mask, run_batch, simulate
from waitline.entrycost import (
    SURPLUS_COLUMNS,
    EntryCostEquilibrium,
    NoEntryError,
    TrivialEntryEq,
    corollary2_comparison,
    queue_full_equilibrium,
    reserve_value,
    shift_transform,
    trivial_entry_equilibrium,
)
from waitline.policies import Composite, FixedTime, QueueFull, Trivial
from waitline.strategies import RushReactor, TrivialEq

U = Uniform()


def test_reserve_value_example():
    assert abs(reserve_value(0.25, 2, 1, U) - 0.5) < 1e-10


def test_reserve_value_brute_force(rng):
    # expected gain of entering at the last moment: v * P(rival below v) - c
    grid = np.linspace(0.3, 0.7, 401)
    rival = rng.random(200_000)
    gain = np.array([v * np.mean(rival < v) - 0.25 for v in grid])
    crossing = grid[np.argmax(gain > 0)]
    assert abs(crossing - reserve_value(0.25, 2, 1, U)) < 0.01


def test_reserve_value_vanishes_with_cost():
    vals = [reserve_value(c, 3, 2, U) for c in (1e-2, 1e-4, 1e-8)]
    assert vals[0] > vals[1] > vals[2] > 0
    assert vals[2] < 1e-3


@given(st.floats(0.001, 0.99), st.sampled_from([(2, 1), (3, 2), (5, 2), (4, 3)]))
def test_reserve_value_exceeds_cost(c, nk):
    n, k = nk
    assert reserve_value(c, n, k, U) > c


def test_reserve_value_errors():
    with pytest.raises(ValueError):
        reserve_value(0.0, 2, 1, U)
    with pytest.raises(NoEntryError):
        reserve_value(1.0, 2, 1, U)


def test_marginal_entrant_earns_nothing():
    c = 0.1
    e = trivial_entry_equilibrium(c, 3, 2, U)
    cfg = GameConfig(3, 2, U, entry_cost=c)
    d = Draws.draw(np.random.default_rng(0), 200_000, 3)
    vals = d.values_u.copy()
    vals[:, 0] = e.v_R + 1e-9
    u = simulate(cfg, e.policy, e.strategy, d, vals).utility[:, 0]
    assert abs(u.mean()) < 3 * u.std(ddof=1) / np.sqrt(u.size)


def test_trivial_entry_bids():
    s = TrivialEntryEq(0.1, 3, 2, U)
    v = np.array([0.1, s.v_reserve, s.v_reserve + 1e-6, 0.6, 1.0])
    b = s.bid(v[None, :], None, None, False)[0]
    assert np.isneginf(b[0]) and np.isneginf(b[1])
    assert b[2] == pytest.approx(0.0, abs=1e-5)
    assert np.all(np.diff(b[2:]) > 0) and np.all(b[2:] < v[2:])


def test_shift_transform():
    cfg, G = shift_transform(GameConfig(2, 1, U, entry_cost=0.25))
    assert cfg.entry_cost is None and cfg.F is G
    assert G.cdf(0.0) == pytest.approx(0.25)
    assert G.cdf(0.5) - G.cdf(0.25) == pytest.approx(0.25)
    assert G.hi == pytest.approx(0.75)
    assert G.cdf(-0.1) == 0.0
    same = GameConfig(2, 1, U)
    assert shift_transform(same) == (same, U)


def test_shifted_game_matches_costly_game():
    c = 0.25
    costly = GameConfig(3, 2, U, entry_cost=c)
    costless, G = shift_transform(costly)
    e = queue_full_equilibrium(c, 3, 2, U)
    d = Draws.draw(np.random.default_rng(0), 100_000, 3)
    a = simulate(costly, e.policy, e.strategy, d)
    b = simulate(costless, QueueFull(), TrivialEq(3, 2, G), d)
    assert np.array_equal(b.values, np.maximum(a.values - c, 0.0))
    # zero types are indifferent; their wins carry no surplus
    eff_b = efficient_mask(b.values, b.won & (b.values > 0), 2, 0.0)
    assert a.efficient.mean() == eff_b.mean() == 1.0
    se = a.surplus.std(ddof=1) / np.sqrt(len(a))
    assert abs(a.surplus.mean() - b.surplus.mean()) < 3 * se
    assert np.max(np.abs(a.surplus - b.surplus)) < 1e-5


@pytest.mark.parametrize("F", [U, Pareto(1, 2)])
def test_queue_full_equilibrium_is_efficient(F):
    e = queue_full_equilibrium(0.25 if F is U else 1.2, 3, 2, F)
    s = run_batch(GameConfig(3, 2, F, entry_cost=e.c), e.policy, e.strategy, 100_000, base_seed=8)
    assert s.efficiency_frequency == 1.0


def test_count_at_fixed_time_breaks_efficiency():
    c = 0.25
    e = queue_full_equilibrium(c, 3, 2, U)
    pol = Composite((FixedTime(0.05), QueueFull()))
    s = run_batch(GameConfig(3, 2, U, entry_cost=c), pol, RushReactor(e.strategy, 2), 20_000, base_seed=1)
    assert s.efficiency_frequency < 1.0
    assert s.rush_frequency > 0


def test_equilibrium_guards():
    assert trivial_entry_equilibrium(0.25, 2, 1, U).v_R > 0.25
    assert queue_full_equilibrium(0.25, 2, 1, U).v_R == 0.25
    with pytest.raises(ValueError):
        EntryCostEquilibrium(0.25, 0.25, None, Trivial())
    with pytest.raises(ValueError):
        EntryCostEquilibrium(0.25, 0.5, None, QueueFull())


def test_corollary2_pareto():
    t = corollary2_comparison(0.2, 3, 2, Pareto(1, 2))
    assert t.hazard is HazardClass.DECREASING
    qf, tr, rush = t.row("queue-full").surplus, t.row("trivial").surplus, t.row("rush").surplus
    assert qf > tr and qf > rush
    assert all(r.prediction_matched for r in t.rows)
    assert t.row("trivial").cutoff == pytest.approx(reserve_value(0.2, 3, 2, Pareto(1, 2)) - 0.2)


def test_corollary2_weibull_decreasing():
    t = corollary2_comparison(0.1, 3, 2, Weibull(1, 0.5))
    assert t.hazard is HazardClass.DECREASING and all(r.prediction_matched for r in t.rows)


def test_corollary2_no_prediction_for_increasing_hazard():
    t = corollary2_comparison(0.2, 3, 2, U)
    assert t.prediction == "no prediction"
    assert all(r.prediction_matched is None for r in t.rows)


def test_corollary2_quadrature_oracle():
    # queue-full surplus on the shifted law: 3 * int_0^inf (1 - G) P(not both rivals above)
    from scipy import integrate

    F, c = Pareto(1, 2), 0.2
    sf = lambda w: (w + c) ** -2 if w + c > 1 else 1.0  # noqa: E731
    x = lambda w: 1 - sf(w) ** 2  # noqa: E731
    val = 3 * (integrate.quad(lambda w: sf(w) * x(w), 0, 1 - c)[0] + integrate.quad(lambda w: sf(w) * x(w), 1 - c, np.inf, limit=400)[0])
    assert corollary2_comparison(c, 3, 2, F).row("queue-full").surplus == pytest.approx(val, rel=1e-7)


def test_surplus_table_csv():
    fh = io.StringIO()
    corollary2_comparison(0.2, 3, 2, Pareto(1, 2)).to_csv(fh, header=["seed: 0"])
    lines = fh.getvalue().splitlines()
    assert lines[1] == ",".join(SURPLUS_COLUMNS)
    assert [l.split(",")[0] for l in lines[2:]] == ["queue-full", "trivial", "rush"]
