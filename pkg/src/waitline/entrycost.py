"""Costly entry: each attempt to join the line costs ``c``, win or lose.

Without information only types above a reserve ``v_R > c`` enter, because an
entrant may find the line already full. Announcing that the line is full
removes that risk, so every type above ``c`` enters and the allocation is
assortative among them. Subtracting ``c`` from every value turns the costly
game into a costless one on the shifted law ``G(x) = F(x + c)``, whose
negative part is an atom at zero; the welfare ranking is computed there.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .dist import (
    HazardClass,
    OrderStatSpec,
    Shifted,
    ValueDistribution,
    ZeroCensored,
    _uniform_params,
    hazard_monotonicity,
    order_stat_cdf,
    order_stat_mean,
    order_stat_partial_mean,
)
from .engine import GameConfig
from .equilibria import bisect_increasing
from .policies import Policy, QueueFull, Trivial
from .strategies import NEVER, ReserveEq, Strategy, TabulatedBid
from .welfare import AllocationRule, cutoff_assortative, virtual_surplus

__all__ = [
    "NoEntryError",
    "reserve_value",
    "shift_transform",
    "TrivialEntryEq",
    "EntryCostEquilibrium",
    "trivial_entry_equilibrium",
    "queue_full_equilibrium",
    "SurplusRow",
    "SurplusTable",
    "corollary2_comparison",
    "SURPLUS_COLUMNS",
]


class NoEntryError(ValueError):
    """Even the top type cannot recoup the entry cost."""


def _win_prob(F, n, k, v):
    return order_stat_cdf(F, OrderStatSpec(n - 1, k), v)


def reserve_value(c: float, n: int, k: int, F: ValueDistribution) -> float:
    """Type indifferent between entering and staying out when nothing is announced.

    It wins iff fewer than ``k`` of the other ``n - 1`` values exceed it, so
    it solves ``v * P(Y_k^{(n-1)} < v) = c``.
    """
    if not c > 0:
        raise ValueError("entry cost must be positive")
    if c >= F.hi:
        raise NoEntryError(f"cost {c} is at or above the top of the support")
    gain = lambda v: np.asarray(v) * np.asarray(_win_prob(F, n, k, v))  # noqa: E731
    hi = F.hi if F.bounded else float(F.quantile(1.0 - 1e-15))
    if float(gain(hi)) <= c:
        raise NoEntryError(f"no type up to {hi} recoups the cost {c}")
    lo = max(c, F.lo)
    v = float(bisect_increasing(gain, c, lo, hi, xtol=1e-14))
    return v


def shift_transform(config: GameConfig):
    """(costless config, shifted law) for a costly game.

    Values drop by ``c``; negative values become an atom at zero, types who
    never profit from entry. A costless config maps to itself.
    """
    c = config.entry_cost
    if c is None:
        return config, config.F
    G = ZeroCensored(Shifted(config.F, -c))
    return replace(config, F=G, entry_cost=None), G


class TrivialEntryEq(Strategy):
    """No-information equilibrium with entry cost: types above ``v_R`` enter at

        (E[Y; Y < v] - E[Y; Y < v_R]) / P(Y < v),    Y = Y_k^{(n-1)},

    so the reserve type enters at 0 and earns nothing.
    """

    name = "trivial-entry-eq"
    message_blind = True

    def __init__(self, c: float, n: int, k: int, F: ValueDistribution):
        self.c, self.n, self.k, self.F = c, n, k, F
        self.v_reserve = reserve_value(c, n, k, F)
        s = OrderStatSpec(n - 1, k)
        base = float(order_stat_partial_mean(F, s, self.v_reserve))
        vr = self.v_reserve

        def fn(v):
            v = np.minimum(np.asarray(v, dtype=float), F.hi)
            out = np.zeros(v.shape)
            ok = (v > vr) & np.isfinite(v)
            out[ok] = (np.asarray(order_stat_partial_mean(F, s, v[ok])) - base) / np.asarray(order_stat_cdf(F, s, v[ok]))
            out[np.isinf(v)] = order_stat_mean(F, s) - base
            return out

        self._fn = fn if _uniform_params(F) is not None else TabulatedBid(fn, F, lower=vr)

    def bid(self, v, pub, clock, reacting):
        v = np.asarray(v, dtype=float)
        return np.where(v > self.v_reserve, self._fn(v), NEVER)


@dataclass(frozen=True)
class EntryCostEquilibrium:
    """Entry threshold, bid rule and policy of a costly-entry equilibrium."""

    c: float
    v_R: float
    strategy: Optional[Strategy]
    policy: Policy

    def __post_init__(self):
        if isinstance(self.policy, Trivial) and not self.v_R > self.c:
            raise ValueError(f"without information the reserve type must exceed the cost: v_R={self.v_R}, c={self.c}")
        if isinstance(self.policy, QueueFull) and not math.isclose(self.v_R, self.c, rel_tol=0, abs_tol=1e-12):
            raise ValueError("with a full-line notice every type above the cost enters")


def trivial_entry_equilibrium(c: float, n: int, k: int, F: ValueDistribution) -> EntryCostEquilibrium:
    s = TrivialEntryEq(c, n, k, F)
    return EntryCostEquilibrium(c, s.v_reserve, s, Trivial())


def queue_full_equilibrium(c: float, n: int, k: int, F: ValueDistribution) -> EntryCostEquilibrium:
    return EntryCostEquilibrium(c, c, ReserveEq(c, n, k, F), QueueFull())


# ---------------------------------------------------------------------------
# welfare ranking on the shifted law

SURPLUS_COLUMNS = ("policy_label", "cutoff", "surplus", "hazard_class", "prediction_matched")


@dataclass(frozen=True)
class SurplusRow:
    policy_label: str
    cutoff: Optional[float]
    surplus: float
    hazard_class: str
    prediction_matched: Optional[bool]


@dataclass(frozen=True)
class SurplusTable:
    rows: tuple
    hazard: HazardClass
    prediction: str

    def row(self, label: str) -> SurplusRow:
        return next(r for r in self.rows if r.policy_label == label)

    def to_csv(self, fh, header=()) -> None:
        for line in header:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SURPLUS_COLUMNS)
        for r in self.rows:
            matched = "" if r.prediction_matched is None else int(r.prediction_matched)
            cutoff = "" if r.cutoff is None else repr(r.cutoff)
            w.writerow((r.policy_label, cutoff, repr(r.surplus), r.hazard_class, matched))


def _rush_rule(n: int, k: int, G: ValueDistribution) -> AllocationRule:
    """Every type that gains from entry joins at once; items go to random entrants."""
    p = float(G.sf(0.0))
    x = sum(math.comb(n - 1, b) * p**b * (1 - p) ** (n - 1 - b) * min(1.0, k / (1 + b)) for b in range(n))
    return AllocationRule(lambda th: np.where(np.asarray(th) > 0, x, 0.0), "RandomProportional(entrants)", 0.0)


def corollary2_comparison(c: float, n: int, k: int, F: ValueDistribution) -> SurplusTable:
    """Expected total surplus of three allocations of the costly game.

    ``queue-full``: assortative among types above ``c`` (zero on the shifted
    law); ``trivial``: assortative above the reserve type, shifted cutoff
    ``v_R - c``; ``rush``: every type above ``c`` joins at once and items go
    to random entrants. Under a strictly decreasing hazard the full-line
    notice must come out strictly on top; for other hazards no ranking is
    predicted.
    """
    cfg = GameConfig(n, k, F, entry_cost=c)
    _, G = shift_transform(cfg)
    v_r = reserve_value(c, n, k, F)
    trivial = EntryCostEquilibrium(c, v_r, None, Trivial())  # enforces v_R > c
    hz = hazard_monotonicity(F)
    rules = [
        ("queue-full", 0.0, cutoff_assortative(n, k, G, 0.0)),
        ("trivial", trivial.v_R - c, cutoff_assortative(n, k, G, v_r - c)),
        ("rush", 0.0, _rush_rule(n, k, G)),
    ]
    values = [(label, cut, virtual_surplus(rule, n, G)) for label, cut, rule in rules]
    if hz is HazardClass.DECREASING:
        top = values[0][2]
        rest = [s for _, _, s in values[1:]]
        matched = [all(top > s for s in rest)] + [s < top for s in rest]
        prediction = "queue-full strictly highest"
    else:
        matched = [None] * len(values)
        prediction = "no prediction"
    rows = tuple(SurplusRow(label, cut, s, hz.value, m) for (label, cut, s), m in zip(values, matched))
    return SurplusTable(rows, hz, prediction)
