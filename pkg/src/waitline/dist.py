"""Value distributions and the order-statistic quantities built on them.

Every bidding and welfare formula in the package consumes a distribution
through the small surface defined here: ``cdf``, ``pdf``, ``sf``,
``quantile`` and ``mean`` (all vectorised over numpy arrays), plus the
order-statistic helpers at module level.

Order statistics follow the ranking-from-the-top convention: ``Y_k^{(n)}`` is
the ``k``-th highest of ``n`` iid draws, and it is the constant 0 when
``k > n``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

__all__ = [
    "ValueDistribution",
    "Uniform",
    "Pareto",
    "Weibull",
    "UpperTruncated",
    "Shifted",
    "ZeroCensored",
    "HazardClass",
    "OrderStatSpec",
    "truncate_above",
    "cdf",
    "inverse_hazard",
    "hazard_monotonicity",
    "order_stat_cdf",
    "order_stat_partial_mean",
    "cond_order_stat_mean",
    "order_stat_mean",
    "integrate_interval",
    "from_config",
    "to_config",
]

QUAD_EPSABS = 1e-10
QUAD_EPSREL = 1e-8


def _scalar(x):
    """Unwrap 0-d arrays so scalar inputs give scalar outputs."""
    return np.asarray(x)[()]


class ValueDistribution:
    """Base class. Subclasses are frozen dataclasses and safe to share."""

    lo: float
    hi: float

    @property
    def support(self) -> tuple[float, float]:
        return (self.lo, self.hi)

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.hi)

    def cdf(self, x):
        raise NotImplementedError

    def pdf(self, x):
        raise NotImplementedError

    def quantile(self, u):
        raise NotImplementedError

    def mean(self) -> float:
        raise NotImplementedError

    def sf(self, x):
        return _scalar(1.0 - np.asarray(self.cdf(x)))

    def sample(self, rng: np.random.Generator, size=None):
        return self.quantile(rng.random(size))


@dataclass(frozen=True)
class Uniform(ValueDistribution):
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)) or self.hi <= self.lo:
            raise ValueError(f"Uniform needs finite lo < hi, got ({self.lo}, {self.hi})")

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return _scalar(np.clip((x - self.lo) / (self.hi - self.lo), 0.0, 1.0))

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x >= self.lo) & (x <= self.hi)
        return _scalar(np.where(inside, 1.0 / (self.hi - self.lo), 0.0))

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        return _scalar(self.lo + u * (self.hi - self.lo))

    def mean(self) -> float:
        return 0.5 * (self.lo + self.hi)


@dataclass(frozen=True)
class Pareto(ValueDistribution):
    """Pareto with scale ``x_m`` (lower end of support) and shape ``alpha > 1``."""

    scale: float = 1.0
    shape: float = 2.0

    def __post_init__(self):
        if self.scale <= 0:
            raise ValueError("Pareto scale must be positive")
        if self.shape <= 1:
            # infinite mean: strict welfare comparisons are meaningless
            raise ValueError(f"Pareto shape must exceed 1 for a finite mean, got {self.shape}")

    @property
    def lo(self) -> float:
        return self.scale

    @property
    def hi(self) -> float:
        return math.inf

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = 1.0 - (self.scale / np.maximum(x, self.scale)) ** self.shape
        return _scalar(np.where(x <= self.scale, 0.0, out))

    def sf(self, x):
        x = np.asarray(x, dtype=float)
        return _scalar((self.scale / np.maximum(x, self.scale)) ** self.shape)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        xs = np.maximum(x, self.scale)
        out = self.shape * self.scale**self.shape / xs ** (self.shape + 1)
        return _scalar(np.where(x < self.scale, 0.0, out))

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        with np.errstate(divide="ignore"):
            return _scalar(self.scale * (1.0 - u) ** (-1.0 / self.shape))

    def mean(self) -> float:
        return self.shape * self.scale / (self.shape - 1.0)


@dataclass(frozen=True)
class Weibull(ValueDistribution):
    """Weibull with scale ``lam`` and shape ``beta``; ``beta < 1`` gives a falling hazard."""

    scale: float = 1.0
    shape: float = 0.5

    def __post_init__(self):
        if self.scale <= 0 or self.shape <= 0:
            raise ValueError("Weibull scale and shape must be positive")

    lo = 0.0

    @property
    def hi(self) -> float:
        return math.inf

    def cdf(self, x):
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        return _scalar(-np.expm1(-((x / self.scale) ** self.shape)))

    def sf(self, x):
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        return _scalar(np.exp(-((x / self.scale) ** self.shape)))

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        xs = np.maximum(x, 0.0)
        z = xs / self.scale
        with np.errstate(divide="ignore", invalid="ignore"):
            out = (self.shape / self.scale) * z ** (self.shape - 1.0) * np.exp(-(z**self.shape))
        return _scalar(np.where(x <= 0.0, 0.0, out))

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        with np.errstate(divide="ignore"):
            return _scalar(self.scale * (-np.log1p(-np.asarray(u, dtype=float))) ** (1.0 / self.shape))

    def mean(self) -> float:
        return self.scale * math.gamma(1.0 + 1.0 / self.shape)


@dataclass(frozen=True)
class UpperTruncated(ValueDistribution):
    """``base`` conditioned on lying at or below ``cap``."""

    base: ValueDistribution
    cap: float

    def __post_init__(self):
        if not (self.base.lo < self.cap):
            raise ValueError(f"cap {self.cap} must exceed the base lower bound {self.base.lo}")
        if self.cap > self.base.hi:
            raise ValueError(f"cap {self.cap} lies above the support of the base distribution")

    @property
    def lo(self) -> float:
        return self.base.lo

    @property
    def hi(self) -> float:
        return self.cap

    @property
    def mass(self) -> float:
        return float(self.base.cdf(self.cap))

    def cdf(self, x):
        x = np.minimum(np.asarray(x, dtype=float), self.cap)
        return _scalar(np.asarray(self.base.cdf(x)) / self.mass)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return _scalar(np.where(x > self.cap, 0.0, np.asarray(self.base.pdf(x)) / self.mass))

    def quantile(self, u):
        return self.base.quantile(np.asarray(u, dtype=float) * self.mass)

    def mean(self) -> float:
        return self.lo + integrate_interval(lambda x: 1.0 - self.cdf(x), self.lo, self.cap)


@dataclass(frozen=True)
class Shifted(ValueDistribution):
    """Location shift: ``X + offset`` for ``X ~ base``. Used by the entry-cost reduction."""

    base: ValueDistribution
    offset: float

    @property
    def lo(self) -> float:
        return self.base.lo + self.offset

    @property
    def hi(self) -> float:
        return self.base.hi + self.offset

    def cdf(self, x):
        return self.base.cdf(np.asarray(x, dtype=float) - self.offset)

    def sf(self, x):
        return self.base.sf(np.asarray(x, dtype=float) - self.offset)

    def pdf(self, x):
        return self.base.pdf(np.asarray(x, dtype=float) - self.offset)

    def quantile(self, u):
        return _scalar(np.asarray(self.base.quantile(u)) + self.offset)

    def mean(self) -> float:
        return self.base.mean() + self.offset


@dataclass(frozen=True)
class ZeroCensored(ValueDistribution):
    """``max(X, 0)``: negative mass collapses to an atom at zero."""

    base: ValueDistribution

    @property
    def lo(self) -> float:
        return max(0.0, self.base.lo)

    @property
    def hi(self) -> float:
        return self.base.hi

    @property
    def atom(self) -> float:
        return float(self.base.cdf(0.0))

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return _scalar(np.where(x < 0.0, 0.0, np.asarray(self.base.cdf(x))))

    def sf(self, x):
        x = np.asarray(x, dtype=float)
        return _scalar(np.where(x < 0.0, 1.0, np.asarray(self.base.sf(x))))

    def pdf(self, x):
        # density of the continuous part only
        x = np.asarray(x, dtype=float)
        return _scalar(np.where(x <= 0.0, 0.0, np.asarray(self.base.pdf(x))))

    def quantile(self, u):
        return _scalar(np.maximum(np.asarray(self.base.quantile(u)), 0.0))

    def mean(self) -> float:
        return integrate_interval(lambda x: self.sf(x), 0.0, self.hi)


def truncate_above(d: ValueDistribution, cap: float) -> ValueDistribution:
    """``d`` restricted to values at or below ``cap``; stays uniform when ``d`` is."""
    if cap >= d.hi:
        return d
    if isinstance(d, Uniform):
        return Uniform(d.lo, cap)
    return UpperTruncated(d, cap)


def _uniform_params(d: ValueDistribution):
    """(lo, hi) if ``d`` is uniform (possibly shifted/truncated), else None."""
    if isinstance(d, Uniform):
        return d.lo, d.hi
    if isinstance(d, UpperTruncated):
        p = _uniform_params(d.base)
        if p is not None:
            return p[0], d.cap
    if isinstance(d, Shifted):
        p = _uniform_params(d.base)
        if p is not None:
            return p[0] + d.offset, p[1] + d.offset
    return None


class HazardClass(str, enum.Enum):
    INCREASING = "Increasing"
    DECREASING = "Decreasing"
    CONSTANT = "Constant"
    NEITHER = "Neither"


@dataclass(frozen=True)
class OrderStatSpec:
    """``k``-th highest of ``n`` draws; degenerate 0 when ``k > n``."""

    n: int
    k: int

    def __post_init__(self):
        if self.n < 0 or self.k < 1:
            raise ValueError(f"invalid order statistic (n={self.n}, k={self.k})")

    @property
    def degenerate(self) -> bool:
        return self.k > self.n


def integrate_interval(f, a: float, b: float) -> float:
    """Adaptive Gauss-Kronrod over ``[a, b]``; an infinite ``b`` is mapped by ``u = 1/x``."""
    if b <= a:
        return 0.0
    opts = dict(epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=200)
    if math.isfinite(b):
        val, _ = integrate.quad(f, a, b, **opts)
        return float(val)
    split = max(a + 1.0, 2.0 * abs(a), 1.0)
    head, _ = integrate.quad(f, a, split, **opts)

    def tail(u):
        if u <= 0.0:
            return 0.0
        return f(1.0 / u) / (u * u)

    rest, _ = integrate.quad(tail, 0.0, 1.0 / split, **opts)
    return float(head + rest)


def cdf(d: ValueDistribution, x):
    return d.cdf(x)


def inverse_hazard(d: ValueDistribution, x):
    """(1 - F(x)) / f(x); raises where the density vanishes."""
    f = np.asarray(d.pdf(x), dtype=float)
    if np.any(f <= 0.0):
        raise ValueError(f"density is zero at {x}; inverse hazard undefined")
    return _scalar(np.asarray(d.sf(x)) / f)


def _hazard_grid(d: ValueDistribution, grid_size: int) -> np.ndarray:
    if d.bounded:
        return d.lo + (d.hi - d.lo) * np.linspace(0.0, 1.0, grid_size, endpoint=False)
    start = d.lo if d.lo > 0 else float(d.quantile(1e-6))
    stop = float(d.quantile(1.0 - 1e-8))
    return np.geomspace(start, stop, grid_size)


def hazard_monotonicity(d: ValueDistribution, grid_size: int = 200, slack: float = 1e-6) -> HazardClass:
    """Classify the hazard rate f/(1-F) on a support grid.

    Bounded supports use an even grid that stops short of the upper end (the
    hazard explodes there); unbounded supports use a geometric grid.
    """
    if grid_size < 3:
        raise ValueError("grid_size must be at least 3")
    x = _hazard_grid(d, grid_size)
    h = np.asarray(d.pdf(x)) / np.asarray(d.sf(x))
    scale = np.maximum(np.maximum(np.abs(h[1:]), np.abs(h[:-1])), 1e-300)
    rel = np.diff(h) / scale
    up = bool(np.all(rel >= -slack))
    down = bool(np.all(rel <= slack))
    if up and down:
        return HazardClass.CONSTANT
    if up:
        return HazardClass.INCREASING
    if down:
        return HazardClass.DECREASING
    return HazardClass.NEITHER


def _spec(spec_or_n, k=None) -> OrderStatSpec:
    if isinstance(spec_or_n, OrderStatSpec):
        return spec_or_n
    return OrderStatSpec(int(spec_or_n), int(k))


def order_stat_cdf(d: ValueDistribution, spec, x, k=None):
    """P(Y_k^{(n)} <= x) = sum_{j<k} C(n,j) (1-F)^j F^(n-j).

    Accepts either an :class:`OrderStatSpec` or ``(n, k)`` as ``spec, k``::

        order_stat_cdf(Uniform(), OrderStatSpec(2, 1), 0.5)  # 0.25
    """
    if k is not None:
        spec, x = _spec(spec, x), k
    s = _spec(spec)
    x = np.asarray(x, dtype=float)
    if s.degenerate:
        return _scalar(np.where(x >= 0.0, 1.0, 0.0))
    F = np.asarray(d.cdf(x), dtype=float)
    S = np.asarray(d.sf(x), dtype=float)
    total = np.zeros_like(F)
    for j in range(s.k):
        total = total + math.comb(s.n, j) * S**j * F ** (s.n - j)
    return _scalar(np.clip(total, 0.0, 1.0))


def _uniform_partial_mean(lo, hi, s: OrderStatSpec, v):
    # Y = lo + (hi-lo) B with B ~ Beta(n-k+1, k)
    a, b = s.n - s.k + 1, s.k
    z = np.clip((np.asarray(v, dtype=float) - lo) / (hi - lo), 0.0, 1.0)
    p = special.betainc(a, b, z)
    pm_b = a / (a + b) * special.betainc(a + 1, b, z)
    return lo * p + (hi - lo) * pm_b, p


def order_stat_partial_mean(d: ValueDistribution, spec, v):
    """E[Y ; Y < v] for Y = Y_k^{(n)} (the unnormalised conditional mean)."""
    s = _spec(spec)
    if s.degenerate:
        return _scalar(np.zeros_like(np.asarray(v, dtype=float)))
    up = _uniform_params(d)
    if up is not None:
        pm, _ = _uniform_partial_mean(up[0], up[1], s, v)
        return _scalar(pm)
    v_arr = np.atleast_1d(np.asarray(v, dtype=float))
    out = np.empty_like(v_arr)
    for i, vi in enumerate(v_arr):
        vi = min(vi, d.hi)
        if vi <= d.lo:
            out[i] = 0.0
            continue
        G = lambda x: float(order_stat_cdf(d, s, x))
        # E[Y;Y<v] = v G(v) - int_lo^v G
        out[i] = vi * G(vi) - integrate_interval(G, d.lo, vi)
    return _scalar(out.reshape(np.shape(v)))


def cond_order_stat_mean(d: ValueDistribution, spec, v):
    """E[Y_k^{(n)} | Y_k^{(n)} < v].

    Closed form through the incomplete beta function for uniform laws,
    adaptive quadrature of ``v - int G / G(v)`` otherwise. Raises when the
    conditioning event has probability zero.
    """
    s = _spec(spec)
    v_arr = np.asarray(v, dtype=float)
    if s.degenerate:
        if np.any(v_arr <= 0.0):
            raise ValueError("conditioning event Y < v has probability zero")
        return _scalar(np.zeros_like(v_arr))
    up = _uniform_params(d)
    if up is not None:
        pm, p = _uniform_partial_mean(up[0], up[1], s, v_arr)
        if np.any(p <= 0.0):
            raise ValueError("conditioning event Y < v has probability zero")
        return _scalar(pm / p)
    flat = np.atleast_1d(v_arr)
    out = np.empty_like(flat)
    for i, vi in enumerate(flat):
        vi = min(vi, d.hi)
        Gv = float(order_stat_cdf(d, s, vi))
        if Gv <= 0.0:
            raise ValueError(f"conditioning event Y < {vi} has probability zero")
        lo = d.lo
        # written as lo + int (1 - G/G(v)) for accuracy when G(v) is small
        out[i] = lo + integrate_interval(lambda x: 1.0 - float(order_stat_cdf(d, s, x)) / Gv, lo, vi)
    return _scalar(out.reshape(v_arr.shape))


def order_stat_mean(d: ValueDistribution, spec) -> float:
    """Unconditional E[Y_k^{(n)}]."""
    s = _spec(spec)
    if s.degenerate:
        return 0.0
    up = _uniform_params(d)
    if up is not None:
        a, b = s.n - s.k + 1, s.k
        return up[0] + (up[1] - up[0]) * a / (a + b)
    return d.lo + integrate_interval(lambda x: 1.0 - float(order_stat_cdf(d, s, x)), d.lo, d.hi)


_KINDS = {"uniform": Uniform, "pareto": Pareto, "weibull": Weibull}


def from_config(cfg: dict) -> ValueDistribution:
    """Build a distribution from ``{"kind": ..., "params": [...]}``.

    ``{"kind": "upper_truncated", "base": {...}, "params": [cap]}`` wraps another entry.
    """
    kind = str(cfg["kind"]).lower()
    params = [float(p) for p in cfg.get("params", [])]
    if kind == "upper_truncated":
        return UpperTruncated(from_config(cfg["base"]), *params)
    if kind not in _KINDS:
        raise ValueError(f"unknown distribution kind {kind!r}")
    return _KINDS[kind](*params)


def to_config(d: ValueDistribution) -> dict:
    if isinstance(d, Uniform):
        return {"kind": "uniform", "params": [d.lo, d.hi]}
    if isinstance(d, Pareto):
        return {"kind": "pareto", "params": [d.scale, d.shape]}
    if isinstance(d, Weibull):
        return {"kind": "weibull", "params": [d.scale, d.shape]}
    if isinstance(d, UpperTruncated):
        return {"kind": "upper_truncated", "base": to_config(d.base), "params": [d.cap]}
    raise ValueError(f"no config encoding for {type(d).__name__}")
