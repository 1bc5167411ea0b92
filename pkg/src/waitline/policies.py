"""Information policies: committed rules for public announcements about the queue.

Each policy is an immutable spec. Per-game mutable data (whether a scheduled
message went out, the privately drawn signal time, ...) lives in a state
dict of numpy arrays with one entry per simultaneous game, so the same code
serves the single-game engine (one row) and the lockstep batch engine.

Two entry points exist:

``next_message(policy, t, history, rng)``
    the functional form: given the public+queue history up to clock ``t``,
    which message would go out next, and when, if nobody else joins.

``Policy.respond(...)``
    the engine hook, called at every message opportunity within an instant.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

__all__ = [
    "NONE",
    "QUEUE_LENGTH",
    "QUEUE_FULL",
    "GOOD_NEWS",
    "QueueLength",
    "QueueFullNotice",
    "GoodNewsSignal",
    "Message",
    "Policy",
    "Trivial",
    "FixedTime",
    "FullRevelation",
    "FixedTimeAndState",
    "ThresholdReached",
    "QueueFull",
    "ContinuousBadNews",
    "Composite",
    "next_message",
    "from_config",
    "to_config",
]

# payload kind codes used in array form
NONE, QUEUE_LENGTH, QUEUE_FULL, GOOD_NEWS = 0, 1, 2, 3


@dataclass(frozen=True)
class QueueLength:
    count: int
    kind = QUEUE_LENGTH

    def __post_init__(self):
        if self.count < 0:
            raise ValueError("queue length cannot be negative")


@dataclass(frozen=True)
class QueueFullNotice:
    kind = QUEUE_FULL


@dataclass(frozen=True)
class GoodNewsSignal:
    """Carries no data beyond its arrival."""

    kind = GOOD_NEWS


def payload_from_code(kind: int, count: int):
    if kind == QUEUE_LENGTH:
        return QueueLength(int(count))
    if kind == QUEUE_FULL:
        return QueueFullNotice()
    if kind == GOOD_NEWS:
        return GoodNewsSignal()
    raise ValueError(f"no payload for kind code {kind}")


def payload_code(payload) -> tuple[int, int]:
    return payload.kind, getattr(payload, "count", -1)


@dataclass(frozen=True)
class Message:
    payload: object
    sent_at: float

    def code(self) -> tuple[int, int]:
        return payload_code(self.payload)


def _no_message(R):
    return np.zeros(R, dtype=np.int64), np.full(R, -1, dtype=np.int64)


class Policy:
    """Base class for the engine hooks. Subclasses are frozen dataclasses."""

    label = "policy"

    def init_state(self, R: int, u: np.ndarray) -> dict:
        """Fresh per-game state for ``R`` games; ``u`` holds one uniform per game."""
        return {}

    def scheduled(self, st: dict, R: int) -> np.ndarray:
        """Time of the next message due regardless of arrivals (``-inf`` if none)."""
        return np.full(R, -np.inf)

    def respond(self, st, t, rnd, q, k, mask):
        """Message at an opportunity: (kind, count) arrays, kind 0 = silence.

        ``q`` is the current queue length, ``rnd`` the alternation round within
        the instant. Only games in ``mask`` may send (and update state).
        """
        return _no_message(len(mask))

    def on_join(self, st, t, joined, mask):
        """Hook after successful joins; ``joined`` counts new queue members."""

    def max_messages(self, n: int, k: int) -> int:
        return 0

    def implied_uniform(self, messages) -> Optional[float]:
        """The private uniform pinned down by ``(time, depth, kind, count)`` messages, if any."""
        return None

    def opportunity_times(self) -> tuple:
        """Fixed instants at which silence itself can be informative."""
        return ()


@dataclass(frozen=True)
class Trivial(Policy):
    label = "trivial"


@dataclass(frozen=True)
class FixedTime(Policy):
    """Reveal the queue length once, at the commonly known time ``tau``."""

    tau: float
    label = "fixed_time"

    def __post_init__(self):
        if not self.tau >= 0:
            raise ValueError("tau must be nonnegative")

    def init_state(self, R, u):
        return {"sent": np.zeros(R, dtype=bool)}

    def scheduled(self, st, R):
        return np.where(st["sent"], -np.inf, self.tau)

    def _fires(self, st, t, rnd, q, mask):
        return mask & ~st["sent"] & (t == self.tau)

    def respond(self, st, t, rnd, q, k, mask):
        fire = self._fires(st, t, rnd, q, mask)
        st["sent"] |= fire
        kind, count = _no_message(len(mask))
        kind[fire] = QUEUE_LENGTH
        count[fire] = q[fire]
        return kind, count

    def max_messages(self, n, k):
        return 1

    def opportunity_times(self):
        return (self.tau,)


@dataclass(frozen=True)
class FixedTimeAndState(FixedTime):
    """At ``tau``, reveal the queue length only if it meets a condition.

    ``mode="below"`` speaks iff fewer than ``threshold`` agents are queued;
    ``mode="exactly"`` speaks iff exactly ``threshold`` are.
    """

    threshold: int = 1
    mode: str = "below"
    label = "fixed_time_state"

    def __post_init__(self):
        super().__post_init__()
        if self.mode not in ("below", "exactly"):
            raise ValueError("mode must be 'below' or 'exactly'")

    def _fires(self, st, t, rnd, q, mask):
        due = mask & ~st["sent"] & (t == self.tau)
        # the opportunity passes either way
        st["sent"] |= due
        cond = q < self.threshold if self.mode == "below" else q == self.threshold
        return due & cond


@dataclass(frozen=True)
class FullRevelation(Policy):
    """Announce the new queue length at every instant it changes."""

    label = "full_revelation"

    def init_state(self, R, u):
        return {"announced": np.zeros(R, dtype=np.int64)}

    def respond(self, st, t, rnd, q, k, mask):
        fire = mask & (q != st["announced"])
        st["announced"][fire] = q[fire]
        kind, count = _no_message(len(mask))
        kind[fire] = QUEUE_LENGTH
        count[fire] = q[fire]
        return kind, count

    def max_messages(self, n, k):
        return k


@dataclass(frozen=True)
class ThresholdReached(Policy):
    """Announce the queue length the first time at most ``remaining`` items are left."""

    remaining: int
    label = "threshold"

    def __post_init__(self):
        if self.remaining < 0:
            raise ValueError("remaining must be nonnegative")

    def init_state(self, R, u):
        return {"sent": np.zeros(R, dtype=bool)}

    def respond(self, st, t, rnd, q, k, mask):
        fire = mask & ~st["sent"] & (k - q <= self.remaining) & (q > 0)
        st["sent"] |= fire
        kind, count = _no_message(len(mask))
        kind[fire] = QUEUE_LENGTH
        count[fire] = q[fire]
        return kind, count

    def max_messages(self, n, k):
        return 1


@dataclass(frozen=True)
class QueueFull(Policy):
    """Announce once, when the last item is claimed."""

    label = "queue_full"

    def init_state(self, R, u):
        return {"sent": np.zeros(R, dtype=bool)}

    def respond(self, st, t, rnd, q, k, mask):
        fire = mask & ~st["sent"] & (q >= k)
        st["sent"] |= fire
        kind, count = _no_message(len(mask))
        kind[fire] = QUEUE_FULL
        return kind, count

    def max_messages(self, n, k):
        return 1


@dataclass(frozen=True)
class ContinuousBadNews(Policy):
    """Draw a private time uniformly on ``(0, tau)``; send a content-free
    signal then iff nobody had joined by the time the clock reached ``tau``.
    """

    tau: float = 2.0 / 9.0
    label = "continuous_bad_news"

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")

    def init_state(self, R, u):
        return {
            "signal_time": self.tau * np.asarray(u, dtype=float).reshape(R),
            "sent": np.zeros(R, dtype=bool),
            "occupied": np.zeros(R, dtype=bool),
        }

    def scheduled(self, st, R):
        live = ~st["sent"] & ~st["occupied"]
        return np.where(live, st["signal_time"], -np.inf)

    def respond(self, st, t, rnd, q, k, mask):
        fire = mask & ~st["sent"] & ~st["occupied"] & (t == st["signal_time"])
        st["sent"] |= fire
        kind, count = _no_message(len(mask))
        kind[fire] = GOOD_NEWS
        return kind, count

    def on_join(self, st, t, joined, mask):
        st["occupied"] |= mask & (joined > 0) & (t >= self.tau)

    def implied_uniform(self, messages):
        s = next((m[0] for m in messages if m[2] == GOOD_NEWS), None)
        if s is None:
            return None
        u = s / self.tau
        # land on a uniform that reproduces the signal time bit for bit
        for _ in range(4):
            if self.tau * u == s:
                break
            u = np.nextafter(u, np.inf if self.tau * u < s else -np.inf)
        return float(u)

    def max_messages(self, n, k):
        return 1


@dataclass(frozen=True)
class Composite(Policy):
    """Several policies sharing one announcer; at most one message per
    opportunity, earlier components first, the rest wait for the next round.
    """

    parts: tuple = field(default_factory=tuple)
    label = "composite"

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(self.parts))
        if any(isinstance(p, ContinuousBadNews) for p in self.parts[1:]):
            raise ValueError("the randomised policy must come first in a composite")

    def init_state(self, R, u):
        return {"parts": [p.init_state(R, u) for p in self.parts]}

    def scheduled(self, st, R):
        out = np.full(R, -np.inf)
        for p, s in zip(self.parts, st["parts"]):
            out = np.maximum(out, p.scheduled(s, R))
        return out

    def respond(self, st, t, rnd, q, k, mask):
        kind, count = _no_message(len(mask))
        open_ = mask.copy()
        for p, s in zip(self.parts, st["parts"]):
            kk, cc = p.respond(s, t, rnd, q, k, open_)
            took = kk > 0
            kind[took], count[took] = kk[took], cc[took]
            open_ &= ~took
        return kind, count

    def on_join(self, st, t, joined, mask):
        for p, s in zip(self.parts, st["parts"]):
            p.on_join(s, t, joined, mask)

    def max_messages(self, n, k):
        return sum(p.max_messages(n, k) for p in self.parts)

    def implied_uniform(self, messages):
        return next((u for u in (p.implied_uniform(messages) for p in self.parts) if u is not None), None)

    def opportunity_times(self):
        return tuple(sorted({x for p in self.parts for x in p.opportunity_times()}, reverse=True))


# ---------------------------------------------------------------------------
# functional form over an explicit history


def _announced_count(history) -> Optional[int]:
    last = None
    for m in history.messages:
        if m.payload.kind == QUEUE_LENGTH:
            last = m.payload.count
    return last


def _sent_by(history, predicate) -> bool:
    return any(predicate(m) for m in history.messages)


def next_message(policy: Policy, t: float, history, rng: np.random.Generator | None = None, state=None):
    """The next (Message, time) the policy would send with no further arrivals.

    ``history`` exposes ``messages`` (each with ``payload`` and ``sent_at``) and
    ``queue_entries`` (each with ``time``). Returns ``None`` for silence. The
    randomised policy needs either ``state`` (from ``policy.init_state``) or
    an ``rng`` to draw its private time.
    """
    if isinstance(policy, Composite):
        s = state["parts"] if state is not None else [None] * len(policy.parts)
        best = None
        for p, ps in zip(policy.parts, s):
            got = next_message(p, t, history, rng, ps)
            if got is not None and (best is None or got[1] > best[1]):
                best = got
        return best
    entries = list(history.queue_entries)
    q = len(entries)
    if isinstance(policy, Trivial):
        return None
    if isinstance(policy, FixedTime):
        if policy.tau > t or _sent_by(history, lambda m: m.sent_at == policy.tau and m.payload.kind == QUEUE_LENGTH):
            return None
        # arrivals at exactly tau come after the announcement
        q_tau = sum(1 for e in entries if e.time > policy.tau)
        if isinstance(policy, FixedTimeAndState):
            ok = q_tau < policy.threshold if policy.mode == "below" else q_tau == policy.threshold
            if not ok:
                return None
        return Message(QueueLength(q_tau), policy.tau), policy.tau
    if isinstance(policy, FullRevelation):
        last = _announced_count(history)
        if q != (0 if last is None else last):
            return Message(QueueLength(q), t), t
        return None
    if isinstance(policy, ThresholdReached):
        if _sent_by(history, lambda m: m.payload.kind == QUEUE_LENGTH):
            return None
        if q > 0 and history.k - q <= policy.remaining:
            return Message(QueueLength(q), t), t
        return None
    if isinstance(policy, QueueFull):
        if q >= history.k and not _sent_by(history, lambda m: m.payload.kind == QUEUE_FULL):
            return Message(QueueFullNotice(), t), t
        return None
    if isinstance(policy, ContinuousBadNews):
        if state is None:
            if rng is None:
                raise ValueError("the randomised policy needs an rng or a state")
            state = policy.init_state(1, rng.random(1))
        signal_time = float(np.asarray(state["signal_time"]).reshape(-1)[0])
        if signal_time > t or _sent_by(history, lambda m: m.payload.kind == GOOD_NEWS):
            return None
        if any(e.time >= policy.tau for e in entries):
            return None
        return Message(GoodNewsSignal(), signal_time), signal_time
    raise TypeError(f"unsupported policy {policy!r}")


# ---------------------------------------------------------------------------
# config encoding

def from_config(cfg: dict) -> Policy:
    """``{"policy": name, "params": {...}}`` to a policy instance."""
    name = str(cfg["policy"]).lower()
    params = dict(cfg.get("params", {}))
    if name == "trivial":
        return Trivial()
    if name == "fixed_time":
        return FixedTime(float(params["tau"]))
    if name == "full_revelation":
        return FullRevelation()
    if name == "fixed_time_state":
        return FixedTimeAndState(
            float(params["tau"]), int(params.get("threshold", 1)), str(params.get("mode", "below"))
        )
    if name == "threshold":
        return ThresholdReached(int(params["remaining"]))
    if name == "queue_full":
        return QueueFull()
    if name == "continuous_bad_news":
        return ContinuousBadNews(float(params.get("tau", 2.0 / 9.0)))
    if name == "composite":
        return Composite(tuple(from_config(p) for p in params["parts"]))
    raise ValueError(f"unknown policy {name!r}")


def to_config(p: Policy) -> dict:
    if isinstance(p, FixedTimeAndState):
        return {"policy": p.label, "params": {"tau": p.tau, "threshold": p.threshold, "mode": p.mode}}
    if isinstance(p, FixedTime):
        return {"policy": p.label, "params": {"tau": p.tau}}
    if isinstance(p, ThresholdReached):
        return {"policy": p.label, "params": {"remaining": p.remaining}}
    if isinstance(p, ContinuousBadNews):
        return {"policy": p.label, "params": {"tau": p.tau}}
    if isinstance(p, Composite):
        return {"policy": p.label, "params": {"parts": [to_config(x) for x in p.parts]}}
    return {"policy": p.label, "params": {}}
