"""Numerical certificates for equilibrium claims.

Two kinds of check live here. The first is a set of closed-form identities for
the randomised good-news construction (n=3, k=2, U[0,1], vhat=1/2, tau=2/9):
win probabilities, the transfer identity, and the payoffs of upward and
downward deviations. The second is simulation based: binned payments versus
a reference payment rule, and a grid search over entry-time deviations with
common random numbers.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import equilibria as eq
from .engine import CHUNK, Draws, GameConfig, _chunk_sizes, simulate
from .strategies import Deviation, StrategyProfile, as_profile

__all__ = [
    "cbn_win_probabilities",
    "cbn_conditional_payment",
    "transfer_identity_residual",
    "pi_U",
    "pi_U_gap",
    "pi_U_gap_at_top",
    "pi_D",
    "pi_D_derivative",
    "pi_D_derivative_roots",
    "PaymentBin",
    "PayoffEquivalenceReport",
    "payoff_equivalence_check",
    "DeviationReport",
    "best_response_search",
    "DEVIATION_COLUMNS",
]

VH = eq.CBN_VHAT
TAU = eq.CBN_TAU


def _domain(v, lo=0.0, hi=VH, name="v"):
    v = np.asarray(v, dtype=float)
    if np.any(v < lo - 1e-15) or np.any(v > hi + 1e-15):
        raise ValueError(f"{name} must lie in [{lo}, {hi}]")
    return np.clip(v, lo, hi)


def _out(x):
    x = np.asarray(x, dtype=float)
    return float(x) if x.ndim == 0 else x


def _top2(v):
    """P(a type-v agent is among the top two of three, given all are below vhat)."""
    return 1.0 - (1.0 - v / VH) ** 2


def cbn_win_probabilities(v):
    """(P(win, no news before own entry), P(win, news first)) for a type ``v <= 1/2``."""
    v = _domain(v)
    ratio = eq._b_nn(v) / TAU
    nn = 2 * VH * (1 - VH) * (v / VH) + VH**2 * ratio * _top2(v)
    yn = VH**2 * (1 - ratio) * _top2(v)
    if np.ndim(v) == 0:
        return float(nn), float(yn)
    return nn, yn


def cbn_conditional_payment(v):
    """Expected wait given a win under the good-news profile, by decomposition.

    Below 1/2 it mixes the no-news and news bids by their win probabilities;
    above, the type enters before the policy can speak and pays ``b_I``.
    """
    v = np.asarray(v, dtype=float)
    lo = np.minimum(v, VH)
    nn, yn = cbn_win_probabilities(lo)
    nn, yn = np.asarray(nn), np.asarray(yn)
    total = nn + yn
    with np.errstate(invalid="ignore", divide="ignore"):
        mixed = (nn * eq._b_nn(lo) + yn * eq._b_yn(lo)) / total
    mixed = np.where(total > 0, mixed, 0.0)
    return _out(np.where(v >= VH, eq._b_i(v), mixed))


def transfer_identity_residual(v):
    """Equilibrium expected transfer minus the assortative benchmark's, for ``v <= 1/2``."""
    v = _domain(v)
    nn, yn = cbn_win_probabilities(v)
    lhs = nn * eq._b_nn(v) + yn * eq._b_yn(v)
    rhs = eq._b_i(v) * (1 - (1 - v) ** 2)
    return _out(lhs - rhs)


def _check_order(vprime, v, upward):
    vprime = _domain(vprime, name="vprime")
    v = _domain(v)
    bad = vprime < v - 1e-15 if upward else vprime > v + 1e-15
    if np.any(bad):
        raise ValueError("need v <= vprime" if upward else "need vprime <= v")
    return vprime, v


def _one_earlier_term(vprime, v):
    return 2 * VH * (1 - VH) * (vprime / VH) * (v - eq._b_nn(vprime))


def _no_news_term(vprime, v):
    return VH**2 * (eq._b_nn(vprime) / TAU) * _top2(vprime) * (v - eq._b_nn(vprime))


def pi_U(vprime, v):
    """Payoff of type ``v`` bidding ``b_NN(vprime)``, ``vprime >= v``, before any news."""
    vprime, v = _check_order(vprime, v, upward=True)
    news = VH**2 * (1 - eq._b_nn(vprime) / TAU) * _top2(v) * (v - eq._b_yn(v))
    return _out(news + _no_news_term(vprime, v) + _one_earlier_term(vprime, v))


def pi_U_gap(vprime, v):
    """Factored closed form of ``pi_U(vprime, v) - pi_U(v, v)``."""
    vprime, v = _check_order(vprime, v, upward=True)
    g = eq.cbn_gamma(vprime)
    inner = (
        -2 * v * (-12 * vprime**2 + g + 9 * vprime - 4)
        + 48 * vprime**3
        - 72 * vprime**2
        + (19 - 4 * g) * vprime
        + 3 * (g + 4)
    )
    return _out((v - vprime) ** 2 / (48 * (vprime - 1)) * inner)


def pi_U_gap_at_top(v):
    """The gap at ``vprime = 1/2``: -(1/12)(1 - 2v)^2 (2 - v)."""
    v = _domain(v)
    return _out(-(1 - 2 * v) ** 2 * (2 - v) / 12)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(64)


def _news_between(vprime, v):
    """Payoff from news arriving between the two entry times, substituting tau' = b_NN(s)."""
    if v <= vprime:
        return 0.0
    half, mid = 0.5 * (v - vprime), 0.5 * (v + vprime)
    s = mid + half * _GL_NODES
    integrand = (1 / TAU) * _top2(s) * (v - eq._b_yn(s)) * np.asarray(eq.cbn_b_nn_prime(s))
    return float(VH**2 * half * np.dot(_GL_WEIGHTS, integrand))


def pi_D(vprime, v):
    """Payoff of type ``v`` waiting to ``b_NN(vprime)``, ``vprime <= v``.

    News arriving before the type's own no-news time is answered with
    ``b_YN(v)``; news arriving later is answered with the bid of the highest
    type still out at that moment.
    """
    vprime, v = _check_order(vprime, v, upward=False)
    vp_arr, v_arr = np.broadcast_arrays(vprime, v)
    between = np.vectorize(_news_between, otypes=[float])(vp_arr, v_arr)
    early = VH**2 * (1 - eq._b_nn(v) / TAU) * _top2(v) * (v - eq._b_yn(v))
    return _out(early + between + _no_news_term(vprime, v) + _one_earlier_term(vprime, v))


def pi_D_derivative(vprime, v):
    """Closed-form partial derivative of ``pi_D`` in ``vprime``."""
    vprime, v = _check_order(vprime, v, upward=False)
    g = eq.cbn_gamma(vprime)
    poly = 24 * vprime**3 - 30 * vprime**2 + (9 - 2 * g) * vprime + g + 4
    return _out(poly * (v - vprime) / (8 * (1 - vprime)))


def pi_D_derivative_roots(v: float) -> tuple:
    """Roots of the derivative: ``v`` and (3 +- sqrt 57)/12, neither of the latter in (0, 1/2)."""
    r = math.sqrt(57.0)
    return (float(v), (3 - r) / 12, (3 + r) / 12)


# ---------------------------------------------------------------------------
# payoff equivalence by simulation


@dataclass(frozen=True)
class PaymentBin:
    lo: float
    hi: float
    winners: int
    mean_payment: float
    reference: float
    gap: float
    std_err: float

    @property
    def within(self) -> bool:
        return abs(self.gap) <= PayoffEquivalenceReport.Z * self.std_err + PayoffEquivalenceReport.ATOL


@dataclass(frozen=True)
class PayoffEquivalenceReport:
    """Winners' mean wait per value bin against a reference payment rule."""

    Z = 3.0
    ATOL = 1e-9  # deterministic bids leave no Monte Carlo spread at all

    bins: tuple
    efficiency_frequency: float
    runs: int

    @property
    def efficient(self) -> bool:
        return self.efficiency_frequency == 1.0

    @property
    def max_abs_gap(self) -> float:
        if not self.efficient:
            return math.nan
        return max(abs(b.gap) for b in self.bins if b.winners > 0)

    @property
    def passed(self) -> bool:
        return self.efficient and all(b.within for b in self.bins if b.winners > 0)

    def describe(self) -> str:
        if not self.efficient:
            return f"allocation not assortatively efficient (frequency {self.efficiency_frequency:.6f}); no gap reported"
        return f"max |gap| {self.max_abs_gap:.3g} over {len(self.bins)} bins, {'pass' if self.passed else 'FAIL'}"


def payoff_equivalence_check(
    config: GameConfig,
    policy,
    strategies,
    runs: int,
    reference: Optional[Callable] = None,
    bins: int = 10,
    base_seed: Optional[int] = None,
) -> PayoffEquivalenceReport:
    """Compare simulated payments conditional on winning with ``reference(v)``.

    ``reference`` defaults to the no-information benchmark
    E[Y_k^{(n-1)} | Y < v], the conditional payment of every assortatively
    efficient mechanism when nothing is revealed. Bins are equal-probability
    slices of the value law; within a bin the gap is the mean of
    ``wait - reference(v)`` over winners.
    """
    n, k, F = config.n, config.k, config.F
    if reference is None:
        reference = lambda v: eq.beta_trivial(v, n, k, F)  # noqa: E731
    seed = config.seed if base_seed is None else base_seed
    sizes = _chunk_sizes(runs, CHUNK)
    children = np.random.SeedSequence(seed).spawn(len(sizes))
    sums = np.zeros(bins)
    sq = np.zeros(bins)
    pay = np.zeros(bins)
    ref = np.zeros(bins)
    count = np.zeros(bins, dtype=np.int64)
    efficient = 0
    for size, ss in zip(sizes, children):
        b = simulate(config, policy, strategies, Draws.draw(np.random.default_rng(ss), size, n))
        efficient += int(b.efficient.sum())
        v = b.values[b.won]
        w = b.entry_time[b.won]
        r = np.asarray(reference(v), dtype=float)
        d = w - r
        u = np.clip(np.asarray(F.cdf(v), dtype=float), 0.0, 1.0 - 1e-15)
        idx = np.minimum((u * bins).astype(int), bins - 1)
        count += np.bincount(idx, minlength=bins)
        sums += np.bincount(idx, weights=d, minlength=bins)
        sq += np.bincount(idx, weights=d * d, minlength=bins)
        pay += np.bincount(idx, weights=w, minlength=bins)
        ref += np.bincount(idx, weights=r, minlength=bins)
    edges = np.asarray(F.quantile(np.linspace(0.0, 1.0, bins + 1)), dtype=float)
    out = []
    for i in range(bins):
        m = int(count[i])
        if m == 0:
            out.append(PaymentBin(edges[i], edges[i + 1], 0, math.nan, math.nan, math.nan, math.nan))
            continue
        mean = sums[i] / m
        var = max(sq[i] / m - mean**2, 0.0) * m / max(m - 1, 1)
        out.append(PaymentBin(edges[i], edges[i + 1], m, pay[i] / m, ref[i] / m, mean, math.sqrt(var / m)))
    return PayoffEquivalenceReport(tuple(out), efficient / runs, runs)


# ---------------------------------------------------------------------------
# best-response search

DEVIATION_COLUMNS = ("value", "deviation", "mean_gain", "std_err", "certified_cell")


def _as_deviation(d):
    if isinstance(d, (tuple, list)):
        shift, reaction = d
        return float(shift), str(reaction)
    return float(d), "obey"


def _label(shift, reaction):
    return f"{shift:+.6g}" if reaction == "obey" else f"{shift:+.6g}/{reaction}"


@dataclass
class DeviationReport:
    """Per-cell mean gain of a unilateral deviation over the profile's payoff."""

    values: np.ndarray
    deviations: list
    mean_gain: np.ndarray
    std_err: np.ndarray
    epsilon_se: float = 4.0
    runs: int = 0
    atol: float = 1e-12

    @property
    def epsilon(self) -> np.ndarray:
        return self.epsilon_se * self.std_err + self.atol

    @property
    def certified_cells(self) -> np.ndarray:
        return self.mean_gain <= self.epsilon

    @property
    def certified(self) -> bool:
        return bool(np.all(self.certified_cells))

    @property
    def max_gain(self) -> float:
        return float(np.max(self.mean_gain))

    @property
    def argmax(self) -> tuple:
        i, j = np.unravel_index(int(np.argmax(self.mean_gain)), self.mean_gain.shape)
        return float(self.values[i]), self.deviations[j]

    def failing_cells(self) -> list:
        bad = np.argwhere(~self.certified_cells)
        return [(float(self.values[i]), self.deviations[j], float(self.mean_gain[i, j]), float(self.std_err[i, j])) for i, j in bad]

    def rows(self):
        ok = self.certified_cells
        for i, v in enumerate(self.values):
            for j, (shift, reaction) in enumerate(self.deviations):
                yield (float(v), _label(shift, reaction), float(self.mean_gain[i, j]), float(self.std_err[i, j]), bool(ok[i, j]))

    def to_csv(self, fh, header: Sequence[str] = ()) -> None:
        for line in header:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DEVIATION_COLUMNS)
        for v, d, g, s, c in self.rows():
            w.writerow((repr(v), d, repr(g), repr(s), int(c)))


def best_response_search(
    config: GameConfig,
    policy,
    strategies,
    value_grid,
    deviation_grid,
    runs: int,
    epsilon_se: float = 4.0,
    base_seed: Optional[int] = None,
    agent: int = 0,
) -> DeviationReport:
    """Monte Carlo gain of each deviation for each pinned value of one agent.

    A deviation is a shift of the planned entry time, optionally paired with a
    reaction rule (``"obey"``, ``"join_any"`` or ``"never"``); plain numbers
    mean ``(shift, "obey")``. Every deviation in a value row replays the same
    draws as the profile itself, so the gain is a paired difference.
    """
    values = np.asarray(list(value_grid), dtype=float)
    devs = [_as_deviation(d) for d in deviation_grid]
    if values.size == 0 or not devs:
        raise ValueError("value and deviation grids must be nonempty")
    profile = as_profile(strategies)
    base = profile.default
    n = config.n
    seed = config.seed if base_seed is None else base_seed
    rows = np.random.SeedSequence(seed).spawn(values.size)
    sizes = _chunk_sizes(runs, CHUNK)
    gain = np.zeros((values.size, len(devs)))
    se = np.zeros_like(gain)
    deviants = [StrategyProfile(base, {**profile.overrides, agent: Deviation(base, s, r)}) for s, r in devs]
    for i, (v, row_seed) in enumerate(zip(values, rows)):
        total = np.zeros(len(devs))
        total_sq = np.zeros(len(devs))
        for size, ss in zip(sizes, row_seed.spawn(len(sizes))):
            draws = Draws.draw(np.random.default_rng(ss), size, n)
            vals = np.asarray(config.F.quantile(draws.values_u), dtype=float)
            vals[:, agent] = v
            u0 = simulate(config, policy, profile, draws, vals).utility[:, agent]
            for j, dp in enumerate(deviants):
                d = simulate(config, policy, dp, draws, vals).utility[:, agent] - u0
                total[j] += d.sum()
                total_sq[j] += d @ d
        mean = total / runs
        var = np.maximum(total_sq / runs - mean**2, 0.0) * runs / max(runs - 1, 1)
        gain[i] = mean
        se[i] = np.sqrt(var / runs)
    return DeviationReport(values, devs, gain, se, epsilon_se, runs)
