"""The descending-clock queueing game.

The clock starts at the top of the value support (or at infinity for
unbounded laws) and runs down to 0. Between instants, every agent still out
holds a planned entry time; the clock jumps to the latest one, or to the
announcer's next scheduled message if that is later (the announcer wins
ties). At an instant the announcer and the agents alternate:

    round r: message opportunity (depth r), then joins (depth r)

Round 0's joins are the planned entries at that time; in later rounds, and in
round 0 when a message went out, joins are reactions to the message just
heard. The instant closes after a round with neither a message nor a join.
When more agents join at once than there are items left, the remaining items
go to a uniformly random subset (a rush).

Two engines share these rules. :func:`run_game` plays one game and keeps the
full history; :func:`simulate` plays many games in lockstep on numpy arrays.
Both read their randomness from the same :class:`Draws`, so they can be
checked against each other exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional

import numpy as np

from .dist import ValueDistribution
from .policies import Message, Policy, payload_from_code
from .strategies import PublicState, StrategyProfile, as_profile

__all__ = [
    "GameConfig",
    "Draws",
    "MessageRecord",
    "QueueEntry",
    "History",
    "AgentRecord",
    "RushEvent",
    "Outcome",
    "ProtocolError",
    "run_game",
    "BatchResult",
    "simulate",
    "RunningStat",
    "OutcomeSummary",
    "run_batch",
    "efficient_mask",
    "OUTCOME_COLUMNS",
    "outcomes_to_csv",
    "outcome_to_json",
]


class ProtocolError(RuntimeError):
    """A strategy asked to enter at or above the running clock."""


@dataclass(frozen=True)
class GameConfig:
    n: int
    k: int
    F: ValueDistribution
    entry_cost: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        if not self.n > self.k >= 1:
            raise ValueError(f"need n > k >= 1, got n={self.n}, k={self.k}")
        c = self.entry_cost
        if c is not None:
            if not c > 0:
                raise ValueError("entry cost must be positive when present")
            if c >= self.F.hi:
                raise ValueError("entry cost must lie below the top of the value support")

    @property
    def cost(self) -> float:
        return 0.0 if self.entry_cost is None else float(self.entry_cost)

    @property
    def start_clock(self) -> float:
        return float(self.F.hi) if self.F.bounded else math.inf


@dataclass(frozen=True)
class Draws:
    """All randomness of R games: value uniforms, tie-break keys, one policy uniform.

    In a rush the joiners with the smallest keys are served, which is a
    uniformly random subset since keys are iid.
    """

    values_u: np.ndarray
    keys: np.ndarray
    policy_u: np.ndarray

    @classmethod
    def draw(cls, rng: np.random.Generator, R: int, n: int) -> "Draws":
        return cls(rng.random((R, n)), rng.random((R, n)), rng.random(R))

    def __len__(self):
        return self.keys.shape[0]

    def row(self, i: int) -> "Draws":
        return Draws(self.values_u[i : i + 1], self.keys[i : i + 1], self.policy_u[i : i + 1])


# ---------------------------------------------------------------------------
# single game with full history


@dataclass(frozen=True)
class MessageRecord:
    payload: object
    sent_at: float
    depth: int

    @property
    def time(self) -> float:
        return self.sent_at

    def message(self) -> Message:
        return Message(self.payload, self.sent_at)


@dataclass(frozen=True)
class QueueEntry:
    agent: int
    time: float
    depth: int


@dataclass
class History:
    """Public message log and the announcer's private queue log."""

    k: int
    messages: list = field(default_factory=list)
    queue_entries: list = field(default_factory=list)

    def __post_init__(self):
        self.validate()

    def validate(self):
        for log, strict in ((self.messages, True), (self.queue_entries, False)):
            for a, b in zip(log, log[1:]):
                if b.time > a.time:
                    raise ValueError("history runs forward in time")
                if b.time == a.time and (b.depth < a.depth or (strict and b.depth == a.depth)):
                    raise ValueError("depths must increase within an instant")
        if len(self.queue_entries) > self.k:
            raise ValueError("more queue entries than items")

    def visible_messages(self, t: float, depth: int) -> list:
        """Messages seen at stage (t, depth): earlier times, or this time at a
        smaller depth.
        """
        return [m for m in self.messages if m.time > t or (m.time == t and m.depth < depth)]

    def queue_length(self, t: float, depth: int) -> int:
        """Queue members that joined before the announcer's depth-``depth``
        opportunity at ``t``.
        """
        return sum(1 for e in self.queue_entries if e.time > t or (e.time == t and e.depth < depth))

    def events(self) -> list:
        """Messages and entries merged in play order."""
        tagged = [(m.time, m.depth, 0, m) for m in self.messages]
        tagged += [(e.time, e.depth, 1, e) for e in self.queue_entries]
        tagged.sort(key=lambda x: (-x[0], x[1], x[2]))
        return [x[3] for x in tagged]


@dataclass(frozen=True)
class AgentRecord:
    agent: int
    value: float
    attempted: bool
    entry_time: Optional[float]
    won: bool
    wait_paid: float
    entry_cost_paid: float
    utility: float


@dataclass(frozen=True)
class RushEvent:
    time: float
    depth: int
    rushers: tuple
    slots: int


@dataclass(frozen=True)
class Outcome:
    agents: tuple
    k: int
    entry_cost: Optional[float] = None
    rush_events: tuple = ()

    @property
    def winners(self) -> frozenset:
        return frozenset(a.agent for a in self.agents if a.won)

    @property
    def values(self) -> np.ndarray:
        return np.array([a.value for a in self.agents])

    @property
    def allocation_value(self) -> float:
        return float(sum(a.value for a in self.agents if a.won))

    @property
    def waits(self) -> float:
        return float(sum(a.wait_paid for a in self.agents))

    @property
    def entry_costs(self) -> float:
        return float(sum(a.entry_cost_paid for a in self.agents))

    @property
    def surplus(self) -> float:
        return float(sum(a.utility for a in self.agents))

    @property
    def efficient(self) -> bool:
        won = np.array([[a.won for a in self.agents]])
        return bool(efficient_mask(self.values[None, :], won, self.k, self.entry_cost)[0])


def _resolve(joiners: np.ndarray, keys: np.ndarray, slots: int) -> np.ndarray:
    """Which joiners get an item, smallest keys first."""
    idx = np.flatnonzero(joiners)
    won = np.zeros_like(joiners)
    if slots <= 0 or idx.size == 0:
        return won
    order = idx[np.argsort(keys[idx], kind="stable")]
    won[order[:slots]] = True
    return won


def run_game(
    config: GameConfig,
    policy: Policy,
    strategies,
    rng: np.random.Generator | None = None,
    draws: Draws | None = None,
):
    """Play one game; returns ``(Outcome, History)``."""
    profile = as_profile(strategies)
    n, k, c = config.n, config.k, config.cost
    if draws is None:
        rng = rng if rng is not None else np.random.default_rng(config.seed)
        draws = Draws.draw(rng, 1, n)
    values = np.asarray(config.F.quantile(draws.values_u[0]), dtype=float)
    keys = draws.keys[0]
    st = policy.init_state(1, draws.policy_u[:1])
    pub = PublicState(1)
    hist = History(k)
    rushes = []

    active = np.ones(n, dtype=bool)
    attempted = np.zeros(n, dtype=bool)
    won = np.zeros(n, dtype=bool)
    entry = np.full(n, np.nan)
    q = 0
    clock = config.start_clock
    fresh = True
    one = np.ones(1, dtype=bool)

    def plan(reacting):
        return profile.plan(values[None, :], pub, np.array([[clock]]), reacting)[0]

    while True:
        desire = plan(False)
        late = active & (desire >= clock)
        if np.any(late):
            raise ProtocolError(f"agent(s) {np.flatnonzero(late).tolist()} bid at or above the clock {clock}")
        desire = np.where(active & (desire >= 0), desire, -np.inf)
        b_max = desire.max() if np.any(active) else -np.inf
        sched = float(policy.scheduled(st, 1)[0])
        if sched > clock or (sched == clock and not fresh):
            sched = -np.inf
        t = max(b_max, sched)
        if not t >= 0:
            break
        clock, fresh = t, False
        rnd = 0
        while True:
            kind, count = policy.respond(st, np.array([clock]), rnd, np.array([q]), k, one)
            spoke = kind[0] > 0
            if spoke:
                hist.messages.append(MessageRecord(payload_from_code(kind[0], count[0]), clock, rnd))
                pub.record(np.array([0]), kind, count, clock)
                joiners = active & (plan(True) >= clock)
            elif rnd == 0:
                joiners = active & (desire == clock)
            else:
                joiners = np.zeros(n, dtype=bool)
            if np.any(joiners):
                slots = k - q
                got = _resolve(joiners, keys, slots)
                m = int(joiners.sum())
                if m >= 2 and m > slots:
                    rushes.append(RushEvent(clock, rnd, tuple(np.flatnonzero(joiners).tolist()), max(slots, 0)))
                for a in np.flatnonzero(got):
                    hist.queue_entries.append(QueueEntry(int(a), clock, rnd))
                attempted |= joiners
                active &= ~joiners
                entry[joiners] = clock
                won |= got
                q += int(got.sum())
                policy.on_join(st, np.array([clock]), np.array([int(got.sum())]), one)
            if not spoke and not np.any(joiners):
                break
            rnd += 1
        if clock <= 0:
            break

    hist.validate()
    wait = np.where(won, entry, 0.0)
    paid = np.where(attempted, c, 0.0)
    util = np.where(won, values - wait, 0.0) - paid
    agents = tuple(
        AgentRecord(
            agent=i,
            value=float(values[i]),
            attempted=bool(attempted[i]),
            entry_time=float(entry[i]) if attempted[i] else None,
            won=bool(won[i]),
            wait_paid=float(wait[i]),
            entry_cost_paid=float(paid[i]),
            utility=float(util[i]),
        )
        for i in range(n)
    )
    return Outcome(agents, k, config.entry_cost, tuple(rushes)), hist


# ---------------------------------------------------------------------------
# lockstep batch engine


def efficient_mask(values, won, k: int, c: float | None = None) -> np.ndarray:
    """Per game: do the winners coincide with the top-k values (above c)?"""
    values = np.asarray(values, dtype=float)
    won = np.asarray(won, dtype=bool)
    R, n = values.shape
    order = np.argsort(-values, axis=1, kind="stable")
    ranked = np.take_along_axis(values, order, axis=1)
    eligible = np.ones_like(ranked, dtype=bool) if c is None else ranked > c
    should = np.zeros((R, n), dtype=bool)
    should[:, :k] = True
    should &= eligible
    target = np.zeros_like(won)
    np.put_along_axis(target, order, should, axis=1)
    return np.all(target == won, axis=1)


@dataclass
class BatchResult:
    """Arrays for R games of n agents."""

    k: int
    entry_cost: Optional[float]
    values: np.ndarray
    attempted: np.ndarray
    entry_time: np.ndarray
    entry_depth: np.ndarray
    won: np.ndarray
    msg_time: np.ndarray
    msg_depth: np.ndarray
    msg_kind: np.ndarray
    msg_count: np.ndarray
    msg_n: np.ndarray
    rush_n: np.ndarray
    rush_time: np.ndarray
    rush_depth: np.ndarray
    rush_size: np.ndarray
    rush_slots: np.ndarray

    def __len__(self):
        return self.values.shape[0]

    @property
    def wait(self) -> np.ndarray:
        return np.where(self.won, self.entry_time, 0.0)

    @property
    def cost_paid(self) -> np.ndarray:
        return np.where(self.attempted, 0.0 if self.entry_cost is None else self.entry_cost, 0.0)

    @property
    def utility(self) -> np.ndarray:
        return np.where(self.won, self.values - self.wait, 0.0) - self.cost_paid

    @property
    def surplus(self) -> np.ndarray:
        return self.utility.sum(axis=1)

    @property
    def efficient(self) -> np.ndarray:
        return efficient_mask(self.values, self.won, self.k, self.entry_cost)

    def outcome(self, i: int) -> Outcome:
        won, attempted = self.won[i], self.attempted[i]
        wait = np.where(won, self.entry_time[i], 0.0)
        paid = np.where(attempted, 0.0 if self.entry_cost is None else self.entry_cost, 0.0)
        util = np.where(won, self.values[i] - wait, 0.0) - paid
        agents = tuple(
            AgentRecord(
                agent=j,
                value=float(self.values[i, j]),
                attempted=bool(self.attempted[i, j]),
                entry_time=float(self.entry_time[i, j]) if self.attempted[i, j] else None,
                won=bool(self.won[i, j]),
                wait_paid=float(wait[j]),
                entry_cost_paid=float(paid[j]),
                utility=float(util[j]),
            )
            for j in range(self.values.shape[1])
        )
        rushes = []
        for r in range(int(self.rush_n[i])):
            t, d = self.rush_time[i, r], self.rush_depth[i, r]
            who = np.flatnonzero(self.attempted[i] & (self.entry_time[i] == t) & (self.entry_depth[i] == d))
            rushes.append(RushEvent(float(t), int(d), tuple(who.tolist()), int(self.rush_slots[i, r])))
        return Outcome(agents, self.k, self.entry_cost, tuple(rushes))

    def history(self, i: int) -> History:
        msgs = [
            MessageRecord(payload_from_code(self.msg_kind[i, j], self.msg_count[i, j]), float(self.msg_time[i, j]), int(self.msg_depth[i, j]))
            for j in range(int(self.msg_n[i]))
        ]
        joined = np.flatnonzero(self.won[i])
        order = sorted(joined, key=lambda a: (-self.entry_time[i, a], self.entry_depth[i, a], a))
        entries = [QueueEntry(int(a), float(self.entry_time[i, a]), int(self.entry_depth[i, a])) for a in order]
        return History(self.k, msgs, entries)

    @classmethod
    def concat(cls, parts: list) -> "BatchResult":
        first = parts[0]
        kw = {"k": first.k, "entry_cost": first.entry_cost}
        for f in cls.__dataclass_fields__:
            if f in kw:
                continue
            kw[f] = np.concatenate([getattr(p, f) for p in parts], axis=0)
        return cls(**kw)


def simulate(
    config: GameConfig,
    policy: Policy,
    strategies,
    draws: Draws,
    values: np.ndarray | None = None,
) -> BatchResult:
    """Play ``len(draws)`` games in lockstep. ``values`` overrides the drawn values."""
    profile = as_profile(strategies)
    n, k = config.n, config.k
    R = len(draws)
    if values is None:
        values = np.asarray(config.F.quantile(draws.values_u), dtype=float)
    values = np.asarray(values, dtype=float).reshape(R, n)
    keys = draws.keys
    st = policy.init_state(R, draws.policy_u)
    pub = PublicState(R)
    M = max(policy.max_messages(n, k), 1)

    active = np.ones((R, n), dtype=bool)
    attempted = np.zeros((R, n), dtype=bool)
    won = np.zeros((R, n), dtype=bool)
    entry = np.full((R, n), np.nan)
    depth = np.full((R, n), -1, dtype=np.int64)
    q = np.zeros(R, dtype=np.int64)
    clock = np.full(R, config.start_clock)
    fresh = np.ones(R, dtype=bool)
    done = np.zeros(R, dtype=bool)

    msg_time = np.full((R, M), np.nan)
    msg_depth = np.full((R, M), -1, dtype=np.int64)
    msg_kind = np.zeros((R, M), dtype=np.int64)
    msg_count = np.full((R, M), -1, dtype=np.int64)
    msg_n = np.zeros(R, dtype=np.int64)
    rush_n = np.zeros(R, dtype=np.int64)
    rush_time = np.full((R, n), np.nan)
    rush_depth = np.full((R, n), -1, dtype=np.int64)
    rush_size = np.zeros((R, n), dtype=np.int64)
    rush_slots = np.zeros((R, n), dtype=np.int64)
    cols = np.arange(n)

    planner = profile.bind(values)

    def plan(rows, reacting):
        return planner(rows, pub.take(rows), clock[rows, None], reacting)

    while True:
        live = np.flatnonzero(~done)
        if live.size == 0:
            break
        act = active[live]
        desire = plan(live, False)
        if np.any(act & (desire >= clock[live, None])):
            bad = live[np.any(act & (desire >= clock[live, None]), axis=1)][0]
            raise ProtocolError(f"game {bad}: a strategy bid at or above the clock {clock[bad]}")
        desire = np.where(act & (desire >= 0), desire, -np.inf)
        b_max = desire.max(axis=1)
        sched = policy.scheduled(st, R)[live]
        c_live = clock[live]
        sched = np.where((sched > c_live) | ((sched == c_live) & ~fresh[live]), -np.inf, sched)
        t = np.maximum(b_max, sched)
        stop = ~(t >= 0)
        done[live[stop]] = True
        keep = ~stop
        live, desire, t = live[keep], desire[keep], t[keep]
        if live.size == 0:
            break
        clock[live] = t
        fresh[live] = False

        # rounds within the instant
        open_ = np.ones(live.size, dtype=bool)
        rnd = 0
        while np.any(open_):
            rows = live[open_]
            mask = np.zeros(R, dtype=bool)
            mask[rows] = True
            kind, count = policy.respond(st, clock, rnd, q, k, mask)
            spoke_all = kind > 0
            spoke = spoke_all[rows]
            if np.any(spoke):
                sr = rows[spoke]
                slot = msg_n[sr]
                msg_time[sr, slot] = clock[sr]
                msg_depth[sr, slot] = rnd
                msg_kind[sr, slot] = kind[sr]
                msg_count[sr, slot] = count[sr]
                msg_n[sr] += 1
                pub.record(sr, kind[sr], count[sr], clock[sr])
            joiners = np.zeros((rows.size, n), dtype=bool)
            if rnd == 0:
                quiet = ~spoke
                joiners[quiet] = active[rows[quiet]] & (desire[open_][quiet] == clock[rows[quiet], None])
            if np.any(spoke):
                sr = rows[spoke]
                react = plan(sr, True)
                joiners[spoke] = active[sr] & (react >= clock[sr, None])
            any_join = joiners.any(axis=1)
            if np.any(any_join):
                jr = rows[any_join]
                J = joiners[any_join]
                slots = k - q[jr]
                # serve the joiners with the smallest keys
                kk = np.where(J, keys[jr], np.inf)
                rank = np.argsort(np.argsort(kk, axis=1, kind="stable"), axis=1, kind="stable")
                got = J & (rank < slots[:, None])
                m = J.sum(axis=1)
                rush = (m >= 2) & (m > slots)
                if np.any(rush):
                    rr = jr[rush]
                    slot = rush_n[rr]
                    rush_time[rr, slot] = clock[rr]
                    rush_depth[rr, slot] = rnd
                    rush_size[rr, slot] = m[rush]
                    rush_slots[rr, slot] = np.maximum(slots[rush], 0)
                    rush_n[rr] += 1
                attempted[jr] |= J
                active[jr] &= ~J
                entry[jr] = np.where(J, clock[jr, None], entry[jr])
                depth[jr] = np.where(J, rnd, depth[jr])
                won[jr] |= got
                newly = got.sum(axis=1)
                q[jr] += newly
                jm = np.zeros(R, dtype=bool)
                jm[jr] = True
                jn = np.zeros(R, dtype=np.int64)
                jn[jr] = newly
                policy.on_join(st, clock, jn, jm)
            still = spoke | any_join
            open_[open_] = still
            rnd += 1
        done[live[clock[live] <= 0]] = True

    return BatchResult(
        k=k,
        entry_cost=config.entry_cost,
        values=values,
        attempted=attempted,
        entry_time=entry,
        entry_depth=depth,
        won=won,
        msg_time=msg_time,
        msg_depth=msg_depth,
        msg_kind=msg_kind,
        msg_count=msg_count,
        msg_n=msg_n,
        rush_n=rush_n,
        rush_time=rush_time,
        rush_depth=rush_depth,
        rush_size=rush_size,
        rush_slots=rush_slots,
    )


# ---------------------------------------------------------------------------
# summaries


@dataclass
class RunningStat:
    """Count, sum and sum of squares; merges associatively."""

    count: int = 0
    total: float = 0.0
    total_sq: float = 0.0

    def add(self, x) -> "RunningStat":
        x = np.asarray(x, dtype=float).ravel()
        return RunningStat(self.count + x.size, self.total + float(x.sum()), self.total_sq + float(np.dot(x, x)))

    def merge(self, other: "RunningStat") -> "RunningStat":
        return RunningStat(self.count + other.count, self.total + other.total, self.total_sq + other.total_sq)

    @property
    def mean(self) -> float:
        return self.total / self.count if self.count else math.nan

    @property
    def std_err(self) -> float:
        if self.count < 2:
            return 0.0
        var = (self.total_sq - self.total**2 / self.count) / (self.count - 1)
        return math.sqrt(max(var, 0.0) / self.count)


_SUMMARY_FIELDS = ("utility", "surplus", "allocation_value", "waits", "entry_costs", "efficient", "rush")


@dataclass
class OutcomeSummary:
    """Batch statistics; ``utility`` is per agent, the rest per game."""

    stats: dict = field(default_factory=lambda: {f: RunningStat() for f in _SUMMARY_FIELDS})

    @classmethod
    def from_batch(cls, b: BatchResult) -> "OutcomeSummary":
        s = cls()
        s.stats["utility"] = s.stats["utility"].add(b.utility)
        s.stats["surplus"] = s.stats["surplus"].add(b.surplus)
        s.stats["allocation_value"] = s.stats["allocation_value"].add(np.where(b.won, b.values, 0.0).sum(axis=1))
        s.stats["waits"] = s.stats["waits"].add(b.wait.sum(axis=1))
        s.stats["entry_costs"] = s.stats["entry_costs"].add(b.cost_paid.sum(axis=1))
        s.stats["efficient"] = s.stats["efficient"].add(b.efficient)
        s.stats["rush"] = s.stats["rush"].add(b.rush_n > 0)
        return s

    def merge(self, other: "OutcomeSummary") -> "OutcomeSummary":
        return OutcomeSummary({f: self.stats[f].merge(other.stats[f]) for f in _SUMMARY_FIELDS})

    @property
    def runs(self) -> int:
        return self.stats["surplus"].count

    def mean(self, name: str) -> float:
        return self.stats[name].mean

    def std_err(self, name: str) -> float:
        return self.stats[name].std_err

    @property
    def mean_utility(self) -> float:
        return self.mean("utility")

    @property
    def mean_surplus(self) -> float:
        return self.mean("surplus")

    @property
    def efficiency_frequency(self) -> float:
        return self.mean("efficient")

    @property
    def rush_frequency(self) -> float:
        return self.mean("rush")

    def to_dict(self) -> dict:
        out = {"runs": self.runs}
        names = {"efficient": "efficiency_frequency", "rush": "rush_frequency", "utility": "mean_utility", "surplus": "mean_surplus"}
        for f in _SUMMARY_FIELDS:
            key = names.get(f, f"mean_{f}")
            out[key] = self.mean(f)
            out[key + "_se"] = self.std_err(f)
        return out


CHUNK = 1 << 15


def _chunk_sizes(runs: int, chunk: int):
    full, rest = divmod(runs, chunk)
    return [chunk] * full + ([rest] if rest else [])


def simulate_runs(config: GameConfig, policy: Policy, strategies, runs: int, base_seed: int | None = None, chunk: int = CHUNK):
    """Yield (chunk index, BatchResult) for ``runs`` games.

    Chunk ``i`` uses child ``i`` of ``SeedSequence(base_seed)``, so results
    depend only on (base_seed, runs, chunk) and chunks can run anywhere.
    """
    if runs < 1:
        raise ValueError("runs must be at least 1")
    seed = config.seed if base_seed is None else base_seed
    sizes = _chunk_sizes(runs, chunk)
    children = np.random.SeedSequence(seed).spawn(len(sizes))
    for i, (size, ss) in enumerate(zip(sizes, children)):
        draws = Draws.draw(np.random.default_rng(ss), size, config.n)
        yield i, simulate(config, policy, strategies, draws)


def run_batch(config: GameConfig, policy: Policy, strategies, runs: int, base_seed: int | None = None, chunk: int = CHUNK) -> OutcomeSummary:
    summary = OutcomeSummary()
    for _, b in simulate_runs(config, policy, strategies, runs, base_seed, chunk):
        summary = summary.merge(OutcomeSummary.from_batch(b))
    return summary


# ---------------------------------------------------------------------------
# serialisation

OUTCOME_COLUMNS = ("run_id", "agent_id", "value", "attempted", "entry_time", "won", "wait_paid", "entry_cost_paid", "utility")


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def outcomes_to_csv(outcomes: Iterable[Outcome], fh, header: Iterable[str] = ()) -> None:
    """One row per agent, fixed column order; ``header`` lines are written as ``# ...``."""
    for line in header:
        fh.write(f"# {line}\n")
    fh.write(",".join(OUTCOME_COLUMNS) + "\n")
    for run_id, o in enumerate(outcomes):
        for a in o.agents:
            row = (run_id, a.agent, a.value, a.attempted, a.entry_time, a.won, a.wait_paid, a.entry_cost_paid, a.utility)
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def outcome_to_json(o: Outcome, run_id: int = 0) -> dict:
    return {
        "run_id": run_id,
        "agents": [asdict(a) for a in o.agents],
        "winners": sorted(o.winners),
        "efficient": o.efficient,
        "surplus": o.surplus,
        "rush_events": [
            {"time": r.time, "depth": r.depth, "rushers": list(r.rushers), "slots": r.slots} for r in o.rush_events
        ],
    }


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True)
