"""Strategy profiles.

A strategy maps (value, public message state, clock) to a desired entry time.
The engine calls it in two situations:

* a main bidding stage (``reacting=False``): the answer must lie strictly
  below the clock; ``-inf`` (or anything negative) means never attempt;
* right after a message (``reacting=True``): an answer at or above the clock
  means join at this very instant, anything lower means wait.

Every call is vectorised: ``v`` is an (R, n) array and the public state holds
(R, 1) arrays, one row per simultaneous game.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import equilibria as eq
from .dist import (
    OrderStatSpec,
    ValueDistribution,
    _uniform_params,
    integrate_interval,
    order_stat_cdf,
    order_stat_mean,
)
from .policies import GOOD_NEWS, NONE, QUEUE_FULL, QUEUE_LENGTH

__all__ = [
    "PublicState",
    "Strategy",
    "StrategyProfile",
    "TabulatedBid",
    "TrivialEq",
    "CbnEq",
    "ReserveEq",
    "RushReactor",
    "Truthful",
    "Lottery",
    "Deviation",
    "NEVER",
]

NEVER = -np.inf


class PublicState:
    """Summary of the public message history, one row per game."""

    FIELDS = ("n_messages", "last_kind", "last_count", "last_time", "seen_full", "good_time")

    def __init__(self, R: int):
        self.n_messages = np.zeros((R, 1), dtype=np.int64)
        self.last_kind = np.full((R, 1), NONE, dtype=np.int64)
        self.last_count = np.full((R, 1), -1, dtype=np.int64)
        self.last_time = np.full((R, 1), np.nan)
        self.seen_full = np.zeros((R, 1), dtype=bool)
        self.good_time = np.full((R, 1), np.nan)

    def record(self, rows, kind, count, t):
        """Apply messages (arrays aligned with ``rows``) to the given games."""
        self.n_messages[rows, 0] += 1
        self.last_kind[rows, 0] = kind
        self.last_count[rows, 0] = count
        self.last_time[rows, 0] = t
        self.seen_full[rows, 0] |= kind == QUEUE_FULL
        good = kind == GOOD_NEWS
        self.good_time[rows[good], 0] = np.broadcast_to(t, rows.shape)[good]

    def take(self, rows) -> "PublicState":
        out = PublicState.__new__(PublicState)
        for f in self.FIELDS:
            setattr(out, f, getattr(self, f)[rows])
        return out

    def just_announced(self, clock) -> np.ndarray:
        return (self.last_kind != NONE) & (self.last_time == clock)


class Strategy:
    """Symmetric rule; subclasses implement :meth:`bid`."""

    name = "strategy"
    # main-stage bid ignores messages and the clock, so it can be computed once
    message_blind = False

    def bid(self, v, pub: PublicState, clock, reacting: bool):
        raise NotImplementedError


@dataclass
class StrategyProfile:
    """A default rule for every agent plus optional per-agent overrides."""

    default: Strategy
    overrides: dict = field(default_factory=dict)

    def plan(self, v, pub, clock, reacting):
        out = np.asarray(self.default.bid(v, pub, clock, reacting), dtype=float)
        out = np.array(np.broadcast_to(out, v.shape))
        for agent, strat in self.overrides.items():
            col = np.asarray(strat.bid(v[:, agent : agent + 1], pub, clock, reacting), dtype=float)
            out[:, agent] = np.broadcast_to(col, (v.shape[0], 1))[:, 0]
        return out

    @property
    def name(self) -> str:
        return self.default.name

    def bind(self, values):
        """Planner over row subsets of ``values`` with message-blind bids cached."""
        cached = None
        if self.default.message_blind:
            cached = np.array(np.broadcast_to(np.asarray(self.default.bid(values, None, None, False), dtype=float), values.shape))

        def planner(rows, pub, clock, reacting):
            v = values[rows]
            if cached is None or reacting:
                out = np.array(np.broadcast_to(np.asarray(self.default.bid(v, pub, clock, reacting), dtype=float), v.shape))
            else:
                out = cached[rows]
            for agent, strat in self.overrides.items():
                col = np.asarray(strat.bid(v[:, agent : agent + 1], pub, clock, reacting), dtype=float)
                out[:, agent] = np.broadcast_to(col, (v.shape[0], 1))[:, 0]
            return out

        return planner


def as_profile(s) -> StrategyProfile:
    return s if isinstance(s, StrategyProfile) else StrategyProfile(s)


class TabulatedBid:
    """A monotone bid function sampled in quantile space and linearly interpolated.

    Used for laws without a closed form, where evaluating the quadrature per
    agent per stage would be far too slow.
    """

    def __init__(self, fn, F: ValueDistribution, size: int = 1025, lower: float | None = None):
        self.F = F
        u = np.linspace(0.0, 1.0, size)
        u_lo = float(F.cdf(lower)) if lower is not None else 0.0
        u = u_lo + (1.0 - u_lo) * u
        v = np.asarray(F.quantile(u), dtype=float)
        self.u = u
        self.values = np.asarray(fn(v), dtype=float)

    def __call__(self, v):
        u = np.asarray(self.F.cdf(v), dtype=float)
        return np.interp(u, self.u, self.values)


def _trivial_fn(n, k, F):
    if _uniform_params(F) is not None:
        return lambda v: eq.beta_trivial(v, n, k, F)
    top = order_stat_mean(F, OrderStatSpec(n - 1, k))

    def fn(v):
        finite = np.isfinite(v)
        out = np.full(v.shape, top)
        out[finite] = eq.beta_trivial(v[finite], n, k, F)
        return out

    return TabulatedBid(fn, F)


class TrivialEq(Strategy):
    """Enter at E[Y_k^{(n-1)} | Y < v] regardless of messages."""

    name = "trivial-eq"
    message_blind = True

    def __init__(self, n: int, k: int, F: ValueDistribution):
        self.n, self.k, self.F = n, k, F
        self._fn = _trivial_fn(n, k, F)

    def bid(self, v, pub, clock, reacting):
        return self._fn(v)


class CbnEq(Strategy):
    """Equilibrium of the randomised good-news policy (n=3, k=2, U[0,1], tau=2/9).

    Before any signal: types above 1/2 enter at ``b_I``, the rest at ``b_NN``.
    After a signal at ``s``: enter at ``b_YN`` of the type, capped at the
    highest type still out at ``s``.
    """

    name = "cbn-eq"

    def bid(self, v, pub, clock, reacting):
        v = np.asarray(v, dtype=float)
        vl = np.minimum(v, eq.CBN_VHAT)
        before = np.where(v >= eq.CBN_VHAT, eq._b_i(v), eq._b_nn(vl))
        rows = np.flatnonzero(~np.isnan(pub.good_time[:, 0]))
        if rows.size == 0:
            return before
        out = np.array(np.broadcast_to(before, np.broadcast_shapes(before.shape, (len(pub.good_time), 1))))
        cap = eq.cbn_inverse("NN", np.clip(pub.good_time[rows], 0.0, eq.CBN_TAU))
        out[rows] = eq._b_yn(np.minimum(vl[rows], cap))
        return out


class ReserveEq(Strategy):
    """Queue-full disclosure with entry cost ``c``: enter at beta_reserve(v) - c
    when v > c, never after the queue is announced full.
    """

    name = "reserve-eq"

    def __init__(self, c: float, n: int, k: int, F: ValueDistribution):
        self.c, self.n, self.k, self.F = c, n, k, F

        def fn(v):
            # limit 0 at the marginal type, E[max(c, Y)] - c at the top
            v = np.asarray(v, dtype=float)
            out = np.zeros(v.shape)
            ok = (v > c) & np.isfinite(v)
            out[ok] = np.asarray(eq.beta_reserve(np.minimum(v[ok], F.hi), c, n, k, F)) - c
            out[~np.isfinite(v)] = self._top_bid()
            return out

        self._fn = fn if _uniform_params(F) is not None else TabulatedBid(fn, F, lower=c)

    def _top_bid(self):
        s = OrderStatSpec(self.n - 1, self.k)
        return integrate_interval(lambda x: 1.0 - float(order_stat_cdf(self.F, s, x)), self.c, self.F.hi)

    def bid(self, v, pub, clock, reacting):
        v = np.asarray(v, dtype=float)
        b = self._fn(v)
        b = np.where(v > self.c, b, NEVER)
        return np.where(pub.seen_full, NEVER, b)


class RushReactor(Strategy):
    """Follow ``base``; on hearing that between 1 and k-1 agents are queued,
    join at once.
    """

    name = "rush-reactor"

    def __init__(self, base: Strategy, k: int):
        self.base, self.k = base, k
        self.message_blind = base.message_blind

    def bid(self, v, pub, clock, reacting):
        b = self.base.bid(v, pub, clock, reacting)
        if not reacting:
            return b
        bad = (
            pub.just_announced(clock)
            & (pub.last_kind == QUEUE_LENGTH)
            & (pub.last_count >= 1)
            & (pub.last_count <= self.k - 1)
        )
        return np.where(bad, np.inf, b)


class Truthful(Strategy):
    """Enter at one's own value: pay-as-bid without shading.

    The bid sits one ulp below the value so the top type can act at the
    opening clock.
    """

    name = "truthful"
    message_blind = True

    def bid(self, v, pub, clock, reacting):
        v = np.asarray(v, dtype=float)
        return np.maximum(np.nextafter(v, -np.inf), 0.0)


class Lottery(Strategy):
    """Everybody enters at the same instant, leaving allocation to the tie-break."""

    name = "lottery"
    message_blind = True

    def __init__(self, at: float = 0.0):
        self.at = at

    def bid(self, v, pub, clock, reacting):
        return np.full(np.shape(v), self.at)


class Deviation(Strategy):
    """``base`` with entry times shifted by ``shift`` and a reaction override.

    ``reaction`` is ``"obey"`` (keep the base reaction), ``"join_any"`` (join
    on any message) or ``"never"`` (ignore messages for the instant).
    """

    REACTIONS = ("obey", "join_any", "never")

    def __init__(self, base: Strategy, shift: float = 0.0, reaction: str = "obey"):
        if reaction not in self.REACTIONS:
            raise ValueError(f"reaction must be one of {self.REACTIONS}")
        self.base, self.shift, self.reaction = base, float(shift), reaction
        self.name = f"{base.name}{shift:+g}/{reaction}"

    def bid(self, v, pub, clock, reacting):
        if reacting:
            if self.reaction == "join_any":
                return np.where(pub.just_announced(clock), np.inf, NEVER) * np.ones(np.shape(v))
            if self.reaction == "never":
                return np.full(np.shape(v), NEVER)
            joins = np.asarray(self.base.bid(v, pub, clock, True), dtype=float) >= clock
            return np.where(joins, np.inf, self._shifted(v, pub, clock))
        return self._shifted(v, pub, clock)

    def _shifted(self, v, pub, clock):
        b = np.asarray(self.base.bid(v, pub, clock, False), dtype=float)
        shifted = np.where(np.isfinite(b) & (b >= 0), np.maximum(b + self.shift, 0.0), b)
        return np.minimum(shifted, np.nextafter(clock, -np.inf))
