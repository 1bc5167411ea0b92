"""Common beliefs about how many items are left, and sudden bad news.

A *stage* is a pair ``(t, j)``. Stage ``(t, 0)`` is the belief as the clock
reaches ``t`` (before the announcer speaks at ``t``). Stage ``(t, j)`` for
``j >= 1`` is right after the announcer's round ``j-1`` opportunity: messages
of rounds ``< j`` at ``t`` are known, and joins from rounds ``<= j-2`` have
been counted (round ``j-1``'s joins are simultaneous with the listeners'
own decisions).

Beliefs come from a particle filter: simulate hidden games forward under the
strategy profile, keep those whose public message sequence matches the one
observed, and read off the remaining-items distribution among survivors, given
that it is positive. Some (policy, profile) pairs have exact shortcuts.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .engine import BatchResult, Draws, GameConfig, History, simulate
from .equilibria import Belief, bisect_increasing
from .policies import FullRevelation, Policy, QueueFull, Trivial, payload_code
from .strategies import PublicState, ReserveEq, TrivialEq, as_profile

__all__ = [
    "Belief",
    "Fosd",
    "fosd_compare",
    "TraceEntry",
    "BeliefTrace",
    "DegeneracyError",
    "ParticleBank",
    "belief_trace",
    "stage_points",
    "detect_sudden_bad_news",
    "trace_to_csv",
]


class Fosd(str, enum.Enum):
    STRICTLY_DOMINATES = "StrictlyDominates"
    WEAKLY_DOMINATES = "WeaklyDominates"
    EQUAL = "Equal"
    WEAKLY_DOMINATED = "WeaklyDominated"
    STRICTLY_DOMINATED = "StrictlyDominated"
    INCOMPARABLE = "Incomparable"

    @property
    def dominates(self) -> bool:
        return self in (Fosd.STRICTLY_DOMINATES, Fosd.WEAKLY_DOMINATES, Fosd.EQUAL)

    @property
    def dominated(self) -> bool:
        return self in (Fosd.STRICTLY_DOMINATED, Fosd.WEAKLY_DOMINATED, Fosd.EQUAL)


def fosd_compare(a: Belief, b: Belief, tol: float = 1e-12, margin: float = 0.0) -> Fosd:
    """Does ``a`` first-order dominate ``b`` (more items left)?

    ``a`` dominates when its CDF lies below ``b``'s everywhere, up to ``tol``.
    Dominance is strict when the largest gap exceeds ``tol + margin``; a
    positive ``margin`` absorbs sampling noise, and gaps inside it are
    reported as weak.
    """
    if a.k != b.k:
        raise ValueError("beliefs must share a support")
    d = b.cdf() - a.cdf()  # >= 0 everywhere when a dominates
    if np.all(np.abs(d) <= tol):
        return Fosd.EQUAL
    if np.all(d >= -tol):
        return Fosd.STRICTLY_DOMINATES if d.max() > tol + margin else Fosd.WEAKLY_DOMINATES
    if np.all(d <= tol):
        return Fosd.STRICTLY_DOMINATED if -d.min() > tol + margin else Fosd.WEAKLY_DOMINATED
    return Fosd.INCOMPARABLE


@dataclass(frozen=True)
class TraceEntry:
    time: float
    depth: int
    belief: Belief
    support: int = 0  # particles behind the estimate; 0 for exact beliefs

    def std_err(self) -> np.ndarray:
        """Binomial standard errors of the CDF, floored so tiny supports stay wide."""
        if self.support <= 0:
            return np.zeros(self.belief.k)
        c = self.belief.cdf()
        return np.sqrt(np.maximum(c * (1 - c), 1.0 / self.support) / self.support)


@dataclass
class BeliefTrace:
    k: int
    entries: list = field(default_factory=list)
    skipped: list = field(default_factory=list)

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    def at(self, t: float, depth: int) -> Optional[TraceEntry]:
        for e in self.entries:
            if e.time == t and e.depth == depth:
                return e
        return None


class DegeneracyError(RuntimeError):
    """Too few particles agree with the observed messages."""


# ---------------------------------------------------------------------------
# stage bookkeeping


def _observed(observed_messages) -> list:
    """Normalise to a list of (time, depth, kind, count)."""
    if isinstance(observed_messages, History):
        observed_messages = observed_messages.messages
    out = []
    for m in observed_messages:
        depth = getattr(m, "depth", 0)
        kind, count = payload_code(m.payload)
        out.append((float(m.sent_at), int(depth), int(kind), int(count)))
    return out


def stage_points(policy: Policy, observed: list, times: Iterable[float]) -> list:
    """All stages worth reporting: a time grid plus every message instant and
    every scheduled opportunity, with depths up to one past the last message.
    """
    pts = {(float(t), 0) for t in times}
    deepest: dict = {}
    for t, d, _, _ in observed:
        deepest[t] = max(deepest.get(t, -1), d)
    for t in policy.opportunity_times():
        deepest.setdefault(float(t), 0)
    for t, d in deepest.items():
        for j in range(max(d, 0) + 2):
            pts.add((t, j))
    return sorted((p for p in pts if p[0] >= 0), key=lambda p: (-p[0], p[1]))


def _visible(observed: list, t: float, j: int) -> list:
    return [o for o in observed if o[0] > t or (o[0] == t and o[1] < j)]


def _default_times(config: GameConfig, size: int = 41) -> np.ndarray:
    top = config.F.hi if config.F.bounded else float(config.F.quantile(0.999))
    return np.linspace(top, 0.0, size)


# ---------------------------------------------------------------------------
# particle filter


@dataclass
class ParticleBank:
    """Simulated hidden games, reusable across many observed histories."""

    config: GameConfig
    policy: Policy
    batch: BatchResult

    strategies: object = None
    policy_u: Optional[float] = None

    @classmethod
    def build(cls, config, policy, strategies, particles: int, rng: np.random.Generator, policy_u: Optional[float] = None) -> "ParticleBank":
        """``policy_u`` fixes the policy's private uniform in every particle."""
        if particles < 1000:
            raise ValueError("use at least 1000 particles")
        draws = Draws.draw(rng, particles, config.n)
        if policy_u is not None:
            draws = Draws(draws.values_u, draws.keys, np.full(particles, policy_u))
        return cls(config, policy, simulate(config, policy, strategies, draws), strategies, policy_u)

    def belief(self, observed: list, t: float, j: int, min_survival: float = 0.01) -> Optional[TraceEntry]:
        b = self.batch
        k = self.config.k
        vis_obs = _visible(observed, t, j)
        M = b.msg_time.shape[1]
        idx = np.arange(M)[None, :]
        exists = idx < b.msg_n[:, None]
        vis = exists & ((b.msg_time > t) | ((b.msg_time == t) & (b.msg_depth < j)))
        ok = vis.sum(axis=1) == len(vis_obs)
        # visible messages form a prefix of each particle's log
        for i, (_, _, kind, count) in enumerate(vis_obs):
            if i >= M:
                ok[:] = False
                break
            ok &= (b.msg_kind[:, i] == kind) & (b.msg_count[:, i] == count)
        joined = b.won & ((b.entry_time > t) | ((b.entry_time == t) & (b.entry_depth <= j - 2)))
        remaining = k - joined.sum(axis=1)
        consistent = int(ok.sum())
        if consistent < max(1, min_survival * len(b)):
            raise DegeneracyError(f"only {consistent} of {len(b)} particles consistent at stage ({t}, {j})")
        keep = ok & (remaining >= 1)
        survivors = int(keep.sum())
        if survivors < max(1, min_survival * consistent):
            return None  # almost surely nothing left: no belief over positive counts
        counts = np.bincount(remaining[keep], minlength=k + 1)[1 : k + 1]
        return TraceEntry(t, j, Belief(counts / survivors), survivors)


# ---------------------------------------------------------------------------
# exact shortcuts


def _entry_threshold(strategy, config: GameConfig, t: float) -> float:
    """Lowest type that has entered by clock ``t`` under a message-blind
    monotone entry rule (before any message)."""
    F = config.F
    hi = F.hi if F.bounded else float(F.quantile(1 - 1e-12))

    def e(v):
        v = np.atleast_1d(np.asarray(v, dtype=float)).reshape(-1, 1)
        return np.asarray(strategy.bid(v, PublicState(v.shape[0]), np.full((v.shape[0], 1), np.inf), False)).reshape(-1)

    if e(np.array([hi]))[0] <= t:
        return hi
    return float(bisect_increasing(lambda x: e(x).reshape(np.shape(x)), t, F.lo, hi))


def _binomial_belief(n: int, k: int, p: float) -> Belief:
    """Remaining = k - B, B ~ Bin(n, p), given B < k."""
    from math import comb

    w = np.array([comb(n, k - kappa) * p ** (k - kappa) * (1 - p) ** (n - k + kappa) for kappa in range(1, k + 1)])
    return Belief.from_weights(w)


def _fast_path(config, policy, profile):
    s = profile.default
    if profile.overrides:
        return None
    if isinstance(policy, FullRevelation):
        return "full"
    if isinstance(policy, Trivial) and isinstance(s, TrivialEq):
        return "threshold"
    if isinstance(policy, QueueFull) and isinstance(s, (TrivialEq, ReserveEq)):
        return "threshold"
    return None


def belief_trace(
    config: GameConfig,
    policy: Policy,
    strategies,
    observed_messages,
    particles: int = 20000,
    rng: np.random.Generator | None = None,
    times: Iterable[float] | None = None,
    bank: ParticleBank | None = None,
    exact: bool = True,
    strict: bool = True,
) -> BeliefTrace:
    """Belief over positive remaining items at every stage of an observed game.

    ``exact=False`` forces the particle filter even where a shortcut exists.
    Stages where no item can be left are omitted. With ``strict=False`` a
    stage the particles cannot resolve is listed in ``trace.skipped`` instead
    of raising :class:`DegeneracyError`.
    """
    profile = as_profile(strategies)
    observed = _observed(observed_messages)
    times = _default_times(config) if times is None else np.asarray(list(times), dtype=float)
    pts = stage_points(policy, observed, times)
    k, n = config.k, config.n
    trace = BeliefTrace(k)
    path = _fast_path(config, policy, profile) if exact else None

    if path == "full":
        for t, j in pts:
            vis = _visible(observed, t, j)
            q = vis[-1][3] if vis else 0
            if k - q >= 1:
                trace.entries.append(TraceEntry(t, j, Belief.point(k - q, k)))
        return trace
    if path == "threshold":
        for t, j in pts:
            if _visible(observed, t, j):
                continue  # only the full notice can be heard; nothing is left after it
            x = _entry_threshold(profile.default, config, t)
            p = float(config.F.sf(x))
            trace.entries.append(TraceEntry(t, j, _binomial_belief(n, k, p)))
        return trace

    rng = rng if rng is not None else np.random.default_rng(config.seed)
    if bank is None:
        bank = ParticleBank.build(config, policy, profile, particles, rng)
    # once a message reveals the policy's private draw, condition on it exactly
    pinned = {}
    for t, j in pts:
        vis = _visible(observed, t, j)
        if vis and vis[-1][2] == 1 and vis[-1][3] >= k:
            continue
        if vis and vis[-1][2] == 2:
            continue
        u = policy.implied_uniform(vis)
        source = bank
        if u is not None:
            if u not in pinned:
                pinned[u] = ParticleBank.build(config, policy, profile, len(bank.batch), rng, policy_u=u)
            source = pinned[u]
        try:
            e = source.belief(observed, t, j)
        except DegeneracyError:
            if strict:
                raise
            trace.skipped.append((t, j))
            continue
        if e is not None:
            trace.entries.append(e)
    return trace


# ---------------------------------------------------------------------------
# detection


def detect_sudden_bad_news(trace: BeliefTrace, margin: float = 0.0, z: float = 0.0, tol: float = 1e-12) -> list:
    """Stages ``(t, j)``, ``j >= 1``, where the belief falls strictly below the
    one just before it at ``t``, and that earlier belief is itself no better
    than anything believed before.

    For particle estimates, ``z`` widens every comparison by ``z`` standard
    errors of the two CDFs involved, on top of the fixed ``margin``.
    """
    if len(trace) == 0:
        raise ValueError("empty trace")
    events = []
    entries = trace.entries

    def band(a, b):
        return margin + z * float(np.max(np.hypot(a.std_err(), b.std_err())))

    for i, e in enumerate(entries):
        if e.depth < 1:
            continue
        pre_i = next((m for m in range(i - 1, -1, -1) if entries[m].time == e.time and entries[m].depth == e.depth - 1), None)
        if pre_i is None:
            continue
        pre = entries[pre_i]
        if fosd_compare(pre.belief, e.belief, tol, band(pre, e)) is not Fosd.STRICTLY_DOMINATES:
            continue
        # an earlier belief may fall short of the pre-message one only by noise
        if all(fosd_compare(x.belief, pre.belief, tol + band(x, pre)).dominates for x in entries[:pre_i]):
            events.append((e.time, e.depth))
    return events


def trace_to_csv(trace: BeliefTrace, fh, header: Iterable[str] = ()) -> None:
    for line in header:
        fh.write(f"# {line}\n")
    fh.write("time,depth,kappa,probability\n")
    for e in trace.entries:
        for kappa in range(1, trace.k + 1):
            fh.write(f"{e.time!r},{e.depth},{kappa},{e.belief[kappa]!r}\n")
