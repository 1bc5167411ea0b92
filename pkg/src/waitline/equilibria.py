"""Equilibrium bidding functions.

Bids are entry times: a type that "bids" ``b`` attempts to join the queue when
the clock reads ``b`` and pays ``b`` in waiting if it gets a place.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .dist import (
    OrderStatSpec,
    ValueDistribution,
    _scalar,
    order_stat_cdf,
    order_stat_mean,
    order_stat_partial_mean,
    truncate_above,
)

__all__ = [
    "Belief",
    "SupplyDemandBelief",
    "bisect_increasing",
    "beta_trivial",
    "beta_uncertain",
    "t_ae",
    "t_ae_top",
    "CBN_VHAT",
    "CBN_TAU",
    "cbn_gamma",
    "cbn_b_i",
    "cbn_b_yn",
    "cbn_b_nn",
    "cbn_b_nn_prime",
    "cbn_bid_functions",
    "cbn_inverse",
    "beta_reserve",
]


class Belief:
    """Probability mass over the positive number of remaining items, kappa = 1..k."""

    __slots__ = ("p",)

    def __init__(self, probs):
        p = np.asarray(probs, dtype=float).copy()
        if p.ndim != 1 or p.size == 0:
            raise ValueError("belief needs a non-empty 1-d probability vector")
        if np.any(p < -1e-15):
            raise ValueError("negative probability in belief")
        total = p.sum()
        if not np.isfinite(total) or abs(total - 1.0) > 1e-9:
            raise ValueError(f"belief probabilities sum to {total}, not 1")
        p = np.clip(p, 0.0, None)
        self.p = p / p.sum()

    @classmethod
    def point(cls, kappa: int, k: int) -> "Belief":
        if not 1 <= kappa <= k:
            raise ValueError(f"kappa={kappa} outside 1..{k}")
        p = np.zeros(k)
        p[kappa - 1] = 1.0
        return cls(p)

    @classmethod
    def from_weights(cls, w) -> "Belief":
        w = np.asarray(w, dtype=float)
        s = w.sum()
        if s <= 0:
            raise ValueError("weights have no positive mass")
        return cls(w / s)

    @classmethod
    def from_mapping(cls, mapping: Mapping[int, float], k: int) -> "Belief":
        p = np.zeros(k)
        for kappa, prob in mapping.items():
            p[int(kappa) - 1] += prob
        return cls(p)

    @property
    def k(self) -> int:
        return self.p.size

    def cdf(self) -> np.ndarray:
        return np.cumsum(self.p)

    def mean(self) -> float:
        return float(np.dot(np.arange(1, self.k + 1), self.p))

    def __getitem__(self, kappa: int) -> float:
        return float(self.p[kappa - 1])

    def __eq__(self, other):
        return isinstance(other, Belief) and self.k == other.k and np.allclose(self.p, other.p, atol=1e-12, rtol=0)

    def __repr__(self):
        body = ", ".join(f"{j + 1}: {q:.6g}" for j, q in enumerate(self.p) if q > 0)
        return f"Belief({{{body}}})"


@dataclass(frozen=True)
class SupplyDemandBelief:
    """Joint pmf over (remaining agents n, remaining items k)."""

    pmf: tuple

    def __init__(self, pmf: Mapping[tuple[int, int], float]):
        items = tuple(sorted((int(n), int(k), float(p)) for (n, k), p in pmf.items() if p > 0))
        if not items:
            raise ValueError("empty supply/demand belief")
        total = sum(p for _, _, p in items)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {total}")
        for n, k, _ in items:
            if not n > k >= 1:
                raise ValueError(f"state (n={n}, k={k}) violates n > k >= 1")
        object.__setattr__(self, "pmf", items)

    @classmethod
    def from_items_belief(cls, mu: Belief, N: int, K: int) -> "SupplyDemandBelief":
        """kappa items remaining means N - K + kappa agents remain."""
        if mu.k != K:
            raise ValueError("belief support does not match K")
        return cls({(N - K + j + 1, j + 1): q for j, q in enumerate(mu.p) if q > 0})


def bisect_increasing(f, target, lo, hi, xtol: float = 1e-12, max_iter: int = 200):
    """Solve ``f(x) = target`` for increasing ``f`` on ``[lo, hi]`` by bisection.

    Vectorised: ``target``, ``lo`` and ``hi`` broadcast against each other and
    every component is bisected until its bracket is narrower than ``xtol``.
    """
    target = np.asarray(target, dtype=float)
    a = np.broadcast_to(np.asarray(lo, dtype=float), target.shape).copy()
    b = np.broadcast_to(np.asarray(hi, dtype=float), target.shape).copy()
    for _ in range(max_iter):
        if np.all(b - a <= xtol):
            break
        m = 0.5 * (a + b)
        below = np.asarray(f(m)) < target
        a = np.where(below, m, a)
        b = np.where(below, b, m)
    return _scalar(0.5 * (a + b))


def beta_trivial(v, n: int, k: int, F: ValueDistribution):
    """Symmetric pay-as-bid equilibrium: E[Y_k^{(n-1)} | Y_k^{(n-1)} < v].

    The lowest type's bid is the limit ``F.lo`` (zero for supports starting at 0).
    """
    if not n > k >= 1:
        raise ValueError(f"need n > k >= 1, got n={n}, k={k}")
    s = OrderStatSpec(n - 1, k)
    v = np.minimum(np.asarray(v, dtype=float), F.hi)
    at_bottom = v <= F.lo
    safe = np.where(at_bottom, F.lo + 0.5 * (min(F.hi, F.lo + 1.0) - F.lo), v)
    pm = np.asarray(order_stat_partial_mean(F, s, safe), dtype=float)
    G = np.asarray(order_stat_cdf(F, s, safe), dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = pm / G
    return _scalar(np.where(at_bottom, F.lo, out))


def _states(H):
    if isinstance(H, SupplyDemandBelief):
        return H.pmf
    return SupplyDemandBelief(H).pmf


def beta_uncertain(v, H, F: ValueDistribution):
    """Bid under uncertainty about (agents, items): the win-probability weighted
    average of the known-state bids,

        beta(v) = sum_h h(n,k) E[Y_k^{(n-1)}; Y < v] / sum_h h(n,k) P(Y_k^{(n-1)} < v).
    """
    states = _states(H)
    v = np.minimum(np.asarray(v, dtype=float), F.hi)
    at_bottom = v <= max(F.lo, 0.0)
    safe = np.where(at_bottom, 1.0, v) if F.lo <= 0 else np.where(at_bottom, F.lo + 1e-300, v)
    num = np.zeros_like(v)
    den = np.zeros_like(v)
    for n, k, h in states:
        s = OrderStatSpec(n - 1, k)
        num = num + h * np.asarray(order_stat_partial_mean(F, s, safe))
        den = den + h * np.asarray(order_stat_cdf(F, s, safe))
    if np.any((den <= 0.0) & ~at_bottom):
        raise ValueError("total win probability G(v) is zero")
    with np.errstate(invalid="ignore", divide="ignore"):
        out = num / den
    return _scalar(np.where(at_bottom, max(F.lo, 0.0), out))


def t_ae(v, mu: Belief, vhat: float, N: int, K: int, F: ValueDistribution):
    """Expected payment conditional on winning, type ``v``, in an assortatively
    efficient mechanism where values are iid ``F`` truncated at ``vhat`` and the
    item count follows ``mu`` (``N``, ``K`` are the game's initial counts).
    """
    if not (F.lo < vhat <= F.hi):
        raise ValueError(f"vhat={vhat} outside the support of F")
    v = np.asarray(v, dtype=float)
    if np.any(v > vhat + 1e-12):
        raise ValueError("type above the highest remaining type vhat")
    H = SupplyDemandBelief.from_items_belief(mu, N, K)
    return beta_uncertain(np.minimum(v, vhat), H, truncate_above(F, vhat))


def t_ae_top(mu: Belief, vhat: float, N: int, K: int, F: ValueDistribution) -> float:
    """Closed form at the top type: sum_kappa mu(kappa) E[Y_kappa^{(N-K+kappa-1)}]."""
    Fv = truncate_above(F, vhat)
    return float(sum(q * order_stat_mean(Fv, OrderStatSpec(N - K + j, j + 1)) for j, q in enumerate(mu.p) if q > 0))


# continuous-bad-news calibration: n=3, k=2, U[0,1]
CBN_VHAT = 0.5
CBN_TAU = 2.0 / 9.0


def _check_domain(v, hi, name):
    v = np.asarray(v, dtype=float)
    if np.any(v < 0.0) or np.any(v > hi):
        raise ValueError(f"{name} is defined on [0, {hi}]")
    return v


def cbn_gamma(v):
    v = np.asarray(v, dtype=float)
    return _scalar(np.sqrt(144 * v**4 - 216 * v**3 + 33 * v**2 + 72 * v + 16))


def _b_i(v):
    return v * (3 - 2 * v) / (3 * (2 - v))


def _b_yn(v):
    vh = CBN_VHAT
    return v * (3 * vh - 2 * v) / (3 * (2 * vh - v))


def _b_nn(v):
    return (cbn_gamma(v) - 12 * v**2 + 9 * v - 4) / (36 * (1 - v))


def cbn_b_i(v):
    return _scalar(_b_i(_check_domain(v, 1.0, "b_I")))


def cbn_b_yn(v):
    return _scalar(_b_yn(_check_domain(v, CBN_VHAT, "b_YN")))


def cbn_b_nn(v):
    return _scalar(_b_nn(_check_domain(v, CBN_VHAT, "b_NN")))


def cbn_b_nn_prime(v):
    """Derivative of the no-news bid."""
    v = _check_domain(v, CBN_VHAT, "b_NN'")
    g = cbn_gamma(v)
    num = g - 12 * v**2 + 9 * v - 4
    dg = (576 * v**3 - 648 * v**2 + 66 * v + 72) / (2 * g)
    dnum = dg - 24 * v + 9
    return _scalar((dnum * (1 - v) + num) / (36 * (1 - v) ** 2))


def cbn_bid_functions(v):
    """(b_I, b_NN, b_YN, gamma) at ``v``; the last three need ``v <= 1/2``."""
    v = _check_domain(v, 1.0, "b_I")
    if np.any(v > CBN_VHAT):
        raise ValueError("b_NN and b_YN are defined on [0, 1/2]")
    return _scalar(_b_i(v)), _scalar(_b_nn(v)), _scalar(_b_yn(v)), cbn_gamma(v)


_CBN = {
    "I": (_b_i, 1.0),
    "NN": (_b_nn, CBN_VHAT),
    "YN": (_b_yn, CBN_VHAT),
}


def cbn_inverse(which: str, t, xtol: float = 1e-12):
    """Invert one of the continuous-bad-news bid functions by bisection."""
    try:
        f, hi = _CBN[which.upper()]
    except KeyError:
        raise ValueError(f"unknown bid function {which!r}; use I, NN or YN") from None
    t = np.asarray(t, dtype=float)
    top = f(np.float64(hi))
    if np.any(t < 0.0) or np.any(t > top + 1e-15):
        raise ValueError(f"t outside the range [0, {top}] of b_{which}")
    t = np.minimum(t, top)
    if f is not _b_nn:
        return bisect_increasing(f, t, 0.0, hi, xtol=xtol)
    # slope stays in [0.34, 0.5], so a coarse bracket plus Newton steps suffices
    x = np.asarray(bisect_increasing(f, t, 0.0, hi, xtol=1e-4), dtype=float)
    for _ in range(4):
        x = np.clip(x - (_b_nn(x) - t) / np.asarray(cbn_b_nn_prime(x)), 0.0, hi)
    return _scalar(x)


def beta_reserve(v, c: float, n: int, k: int, F: ValueDistribution):
    """Pay-as-bid bid with reserve ``c``: E[max(c, Y) | max(c, Y) < v], Y = Y_k^{(n-1)}.

    Agents following it join the queue at ``beta_reserve(v) - c``.
    """
    v = np.asarray(v, dtype=float)
    if np.any(v <= c):
        raise ValueError("beta_reserve needs v > c")
    s = OrderStatSpec(n - 1, k)
    v = np.minimum(v, F.hi)
    Gc = float(order_stat_cdf(F, s, c))
    pmc = float(order_stat_partial_mean(F, s, c))
    num = c * Gc + np.asarray(order_stat_partial_mean(F, s, v)) - pmc
    G = np.asarray(order_stat_cdf(F, s, v))
    # no rival can be beaten yet: the limit at the bottom of the support
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(G > 0, num / np.where(G > 0, G, 1.0), max(c, F.lo))
    return _scalar(out)
