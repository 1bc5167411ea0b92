"""Assortative efficiency, realised surplus and the virtual-surplus calculus.

Waiting is pure waste, so total surplus equals the agents' total utility.
With the lowest participating type's rent normalised to zero, the envelope
theorem turns expected total utility into

    n * integral of (1 - F(theta)) * x(theta) d theta    over [max(lo, 0), hi]

where ``x`` is the interim probability of getting an item. This module
evaluates that integral for allocation rules and compares rules under the
hazard-rate ordering.
"""

from __future__ import annotations

import enum
import json
from dataclasses import asdict, dataclass
from typing import Callable, Iterable, Optional

import numpy as np

from .dist import HazardClass, OrderStatSpec, ValueDistribution, hazard_monotonicity, integrate_interval, order_stat_cdf

__all__ = [
    "AllocationRule",
    "assortative_top_k",
    "random_proportional",
    "cutoff_assortative",
    "empirical_rule",
    "virtual_surplus",
    "Ordering",
    "WelfareComparison",
    "welfare_order_check",
    "is_assortatively_efficient",
    "SurplusReport",
    "summarize",
]


@dataclass(frozen=True)
class AllocationRule:
    """Interim win probability ``x(theta)`` with a label saying where it came from.

    ``breakpoints`` lists the types where ``x`` jumps, so integrals can split there.
    """

    x: Callable
    provenance: str
    cutoff: Optional[float] = None
    breakpoints: tuple = ()

    def __call__(self, theta):
        return np.clip(np.asarray(self.x(theta), dtype=float), 0.0, 1.0)

    def mass(self, F: ValueDistribution) -> float:
        """E[x(V)]: the expected share of agents served."""
        lo = F.lo
        return integrate_interval(lambda th: float(self(th)) * float(F.pdf(th)), lo, F.hi)


def assortative_top_k(n: int, k: int, F: ValueDistribution) -> AllocationRule:
    s = OrderStatSpec(n - 1, k)
    return AllocationRule(lambda th: order_stat_cdf(F, s, th), "AssortativeTopK")


def random_proportional(n: int, k: int) -> AllocationRule:
    return AllocationRule(lambda th: np.full(np.shape(th), k / n), "RandomProportional")


def cutoff_assortative(n: int, k: int, F: ValueDistribution, cutoff: float) -> AllocationRule:
    """Top-k among types above ``cutoff``; nobody below it is served."""
    s = OrderStatSpec(n - 1, k)

    def x(th):
        th = np.asarray(th, dtype=float)
        return np.where(th > cutoff, np.asarray(order_stat_cdf(F, s, th)), 0.0)

    return AllocationRule(x, f"CutoffAssortative({cutoff:g})", cutoff)


def empirical_rule(values, won, F: ValueDistribution, bins: int = 100) -> AllocationRule:
    """Win frequency by value-quantile bin, as a step function of the type."""
    v = np.asarray(values, dtype=float).ravel()
    w = np.asarray(won, dtype=float).ravel()
    u = np.clip(np.asarray(F.cdf(v), dtype=float), 0.0, 1.0 - 1e-15)
    idx = np.minimum((u * bins).astype(int), bins - 1)
    hits = np.bincount(idx, weights=w, minlength=bins)
    tots = np.bincount(idx, minlength=bins)
    freq = np.divide(hits, tots, out=np.zeros(bins), where=tots > 0)

    def x(th):
        uu = np.clip(np.asarray(F.cdf(th), dtype=float), 0.0, 1.0 - 1e-15)
        return freq[np.minimum((uu * bins).astype(int), bins - 1)]

    edges = tuple(float(e) for e in F.quantile(np.arange(1, bins) / bins))
    return AllocationRule(x, "Empirical", breakpoints=edges)


def virtual_surplus(rule: AllocationRule, n: int, F: ValueDistribution) -> float:
    """Expected total surplus n * int (1 - F) x over the nonnegative part of the support."""
    lo = max(F.lo, 0.0)
    if rule.cutoff is not None:
        lo = max(lo, rule.cutoff)
    cuts = [lo] + sorted(b for b in rule.breakpoints if lo < b < F.hi) + [F.hi]
    f = lambda th: float(F.sf(th)) * float(rule(th))  # noqa: E731
    val = sum(integrate_interval(f, a, b) for a, b in zip(cuts, cuts[1:]))
    if not np.isfinite(val):
        raise ArithmeticError("virtual-surplus integral did not converge")
    return n * val


class Ordering(str, enum.Enum):
    A_HIGHER = "A higher"
    A_LOWER = "A lower"
    EQUAL = "Equal"


@dataclass(frozen=True)
class WelfareComparison:
    surplus_a: float
    surplus_b: float
    ordering: Ordering
    hazard: HazardClass
    predicted: Optional[Ordering]
    matches: Optional[bool]

    @property
    def justification(self) -> str:
        if self.predicted is None:
            return "no prediction"
        return f"{self.hazard.value} hazard predicts {self.predicted.value}"


def _order(a: float, b: float, tol: float) -> Ordering:
    if abs(a - b) <= tol * max(1.0, abs(a), abs(b)):
        return Ordering.EQUAL
    return Ordering.A_HIGHER if a > b else Ordering.A_LOWER


def welfare_order_check(F: ValueDistribution, n: int, k: int, rule_a: AllocationRule, rule_b: AllocationRule, tol: float = 1e-9) -> WelfareComparison:
    """Compare two rules and check the answer against the hazard-rate rule of thumb.

    Screening by assortative allocation pays off only when the tail is thick:
    with a rising hazard the assortative rule raises less surplus than a
    lottery, with a falling hazard more. The prediction is made when
    ``rule_a`` is assortative (possibly with a cutoff) and ``rule_b`` is not
    more assortative than it, or the two rules coincide.
    """
    sa, sb = virtual_surplus(rule_a, n, F), virtual_surplus(rule_b, n, F)
    ordering = _order(sa, sb, tol)
    hz = hazard_monotonicity(F)
    predicted = None
    if rule_a is rule_b or rule_a == rule_b:
        predicted = Ordering.EQUAL
    elif rule_a.provenance.startswith(("AssortativeTopK", "CutoffAssortative")) and not rule_b.provenance.startswith(
        ("AssortativeTopK", "CutoffAssortative")
    ):
        if hz is HazardClass.INCREASING:
            predicted = Ordering.A_LOWER
        elif hz is HazardClass.DECREASING:
            predicted = Ordering.A_HIGHER
        elif hz is HazardClass.CONSTANT:
            predicted = Ordering.EQUAL
    matches = None if predicted is None else (ordering == predicted)
    return WelfareComparison(sa, sb, ordering, hz, predicted, matches)


def is_assortatively_efficient(outcome, c: Optional[float] = None) -> bool:
    """Winners are exactly the k highest values (those above ``c``, if given)."""
    if c is None:
        c = outcome.entry_cost
    vals = sorted(((a.value, a.agent) for a in outcome.agents), reverse=True)
    eligible = [(v, i) for v, i in vals if c is None or v > c][: outcome.k]
    winners = outcome.winners
    if len(winners) != len(eligible):
        return False
    cut = eligible[-1][0] if eligible else None
    # equal values are interchangeable
    for a in outcome.agents:
        if a.agent in winners and cut is not None and a.value < cut:
            return False
    return all(a.agent in winners for a in outcome.agents if cut is not None and a.value > cut)


@dataclass(frozen=True)
class SurplusReport:
    total_surplus: float
    allocation_value: float
    waits_burned: float
    entry_costs_burned: float
    efficiency_frequency: float
    total_surplus_se: float = 0.0
    allocation_value_se: float = 0.0
    waits_burned_se: float = 0.0
    entry_costs_burned_se: float = 0.0
    efficiency_frequency_se: float = 0.0
    runs: int = 1

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=False)


def _mean_se(x):
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        return float(x.mean()), 0.0
    return float(x.mean()), float(x.std(ddof=1) / np.sqrt(x.size))


def summarize(outcomes) -> SurplusReport:
    """Means and standard errors over a batch (``Outcome`` objects or a ``BatchResult``)."""
    if hasattr(outcomes, "won") and hasattr(outcomes, "values"):
        b = outcomes
        alloc = np.where(b.won, b.values, 0.0).sum(axis=1)
        waits = b.wait.sum(axis=1)
        costs = b.cost_paid.sum(axis=1)
        eff = b.efficient.astype(float)
    else:
        outcomes = list(outcomes)
        if not outcomes:
            raise ValueError("empty batch")
        alloc = np.array([o.allocation_value for o in outcomes])
        waits = np.array([o.waits for o in outcomes])
        costs = np.array([o.entry_costs for o in outcomes])
        eff = np.array([is_assortatively_efficient(o) for o in outcomes], dtype=float)
    total = alloc - waits - costs
    stats = [_mean_se(x) for x in (total, alloc, waits, costs, eff)]
    return SurplusReport(
        *[m for m, _ in stats],
        *[s for _, s in stats],
        runs=int(total.size),
    )
