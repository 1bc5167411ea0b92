import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from waitline.dist import Pareto, Uniform, Weibull
from waitline.equilibria import (
    CBN_TAU,
    CBN_VHAT,
    Belief,
    beta_reserve,
    beta_trivial,
    beta_uncertain,
    bisect_increasing,
    cbn_b_i,
    cbn_b_yn,
    cbn_bid_functions,
    cbn_inverse,
    t_ae,
    t_ae_top,
)
from waitline.beliefs import Fosd, fosd_compare

U = Uniform()


def min_of_two(v):
    return v * (3 - 2 * v) / (3 * (2 - v))


def test_beta_trivial_examples():
    assert beta_trivial(0.8, 2, 1, U) == pytest.approx(0.4, abs=1e-12)
    assert beta_trivial(0.5, 3, 2, U) == pytest.approx(2 / 9, abs=1e-12)
    assert beta_trivial(0.0, 3, 2, U) == 0.0
    assert beta_trivial(1.0, 3, 2, U) == pytest.approx(1 / 3, abs=1e-12)


def test_beta_trivial_monte_carlo(rng):
    # E[other value | other value < 0.8] with one rival for one item
    x = rng.random(500_000)
    kept = x[x < 0.8]
    assert abs(kept.mean() - beta_trivial(0.8, 2, 1, U)) < 3 * kept.std() / np.sqrt(kept.size)


def test_beta_trivial_rejects_bad_counts():
    with pytest.raises(ValueError):
        beta_trivial(0.5, 2, 2, U)


@pytest.mark.parametrize("F", [U, Pareto(1, 2.5), Weibull(1, 0.5)])
@pytest.mark.parametrize("n, k", [(2, 1), (3, 2), (5, 2)])
def test_beta_trivial_shades_and_increases(F, n, k):
    hi = F.hi if F.bounded else float(F.quantile(0.99))
    v = np.linspace(F.lo, hi, 80)[1:]
    b = np.asarray(beta_trivial(v, n, k, F))
    assert np.all(np.diff(b) > 0)
    assert np.all(b < v)


def test_beta_uncertain_examples():
    assert beta_uncertain(0.5, {(3, 2): 1.0}, U) == pytest.approx(2 / 9, abs=1e-12)
    assert beta_uncertain(1.0, {(2, 1): 0.5, (3, 2): 0.5}, U) == pytest.approx(5 / 12, abs=1e-12)
    assert beta_uncertain(0.0, {(2, 1): 0.5, (3, 2): 0.5}, U) == 0.0


def test_beta_uncertain_monte_carlo(rng):
    # Bid of the top type: the win-weighted mean payment across the two states.
    m = 400_000
    state = rng.random(m) < 0.5
    one_rival = rng.random(m)
    two_rivals_min = rng.random((m, 2)).min(axis=1)
    pay = np.where(state, one_rival, two_rivals_min)
    est, se = pay.mean(), pay.std() / np.sqrt(m)
    assert abs(est - beta_uncertain(1.0, {(2, 1): 0.5, (3, 2): 0.5}, U)) < 3 * se


@given(st.integers(2, 7), st.integers(1, 6), st.floats(0.01, 1.0))
def test_beta_uncertain_point_mass_is_trivial(n, k, v):
    assume(k < n)
    assert abs(beta_uncertain(v, {(n, k): 1.0}, U) - beta_trivial(v, n, k, U)) < 1e-9


def test_t_ae_examples():
    assert t_ae(0.5, Belief.point(1, 2), 0.5, 3, 2, U) == pytest.approx(0.25, abs=1e-12)
    mixed = Belief.from_mapping({1: 0.5, 2: 0.5}, 2)
    assert t_ae(1.0, mixed, 1.0, 3, 2, U) == pytest.approx(5 / 12, abs=1e-12)
    assert t_ae_top(mixed, 1.0, 3, 2, U) == pytest.approx(5 / 12, abs=1e-12)
    assert t_ae(1e-12, mixed, 1.0, 3, 2, U) == pytest.approx(0.0, abs=1e-9)


def test_t_ae_rejects_type_above_cap():
    with pytest.raises(ValueError):
        t_ae(0.7, Belief.point(1, 2), 0.5, 3, 2, U)


beliefs3 = st.lists(st.floats(0.0, 1.0), min_size=3, max_size=3).filter(lambda w: sum(w) > 1e-3)


@given(beliefs3, beliefs3, st.floats(0.05, 1.0))
def test_t_ae_falls_with_better_news(wa, wb, vhat):
    a, b = Belief.from_weights(wa), Belief.from_weights(wb)
    rel = fosd_compare(a, b)
    assume(rel is Fosd.STRICTLY_DOMINATES and np.max(b.cdf() - a.cdf()) > 1e-3)
    # more items left means a lower expected payment for the same type
    assert t_ae(vhat, b, vhat, 5, 3, U) > t_ae(vhat, a, vhat, 5, 3, U)


def test_t_ae_increasing_and_continuous():
    mu = Belief.from_mapping({1: 0.3, 2: 0.7}, 2)
    v = np.linspace(0.0, 0.8, 401)
    tv = np.array([t_ae(x, mu, 0.8, 3, 2, U) for x in v])
    assert np.all(np.diff(tv) > 0)
    assert np.max(np.abs(np.diff(tv))) < 5 * (v[1] - v[0])


def test_cbn_bid_examples():
    b_i, b_nn, b_yn, g = cbn_bid_functions(0.5)
    assert (b_i, b_nn, b_yn) == pytest.approx((2 / 9, 2 / 9, 1 / 6), abs=1e-14)
    assert g == pytest.approx(6.5, abs=1e-14)
    assert cbn_bid_functions(0.0) == pytest.approx((0.0, 0.0, 0.0, 4.0), abs=1e-15)
    assert cbn_b_i(1.0) == pytest.approx(1 / 3, abs=1e-14)
    with pytest.raises(ValueError):
        cbn_bid_functions(0.7)


def test_cbn_feasibility_at_cap():
    b_i, b_nn, b_yn, _ = cbn_bid_functions(CBN_VHAT)
    assert b_i == pytest.approx(CBN_TAU, abs=1e-14)
    assert b_nn == pytest.approx(CBN_TAU, abs=1e-14)
    assert b_yn < CBN_TAU


def test_cbn_inverse_examples():
    assert cbn_inverse("NN", 2 / 9) == pytest.approx(0.5, abs=1e-11)
    assert cbn_inverse("I", 0.0) == pytest.approx(0.0, abs=1e-11)
    # b_YN is flat at 1/2, so the argument is only recoverable to ~sqrt(eps)
    x = cbn_inverse("YN", 1 / 6)
    assert cbn_b_yn(x) == pytest.approx(1 / 6, abs=1e-15)
    assert x == pytest.approx(0.5, abs=1e-7)
    with pytest.raises(ValueError):
        cbn_inverse("XX", 0.1)
    with pytest.raises(ValueError):
        cbn_inverse("YN", 0.3)


def test_b_i_is_min_of_two_conditional_mean():
    v = np.linspace(0, 1, 101)
    b_i = np.array([cbn_bid_functions(x)[0] if x <= 0.5 else min_of_two(x) for x in v])
    assert np.max(np.abs(b_i - min_of_two(v))) < 1e-14


def test_beta_reserve_value():
    # E[max(c, Y) | max(c, Y) < v] with Y the single rival's value
    expected = (0.25 * 0.25 + (0.5**2 - 0.25**2) / 2) / 0.5
    assert expected == pytest.approx(0.3125)
    assert beta_reserve(0.5, 0.25, 2, 1, U) == pytest.approx(expected, abs=1e-12)


def test_beta_reserve_monte_carlo(rng):
    y = rng.random(1_000_000)
    pay = np.maximum(0.25, y)[y < 0.5]
    assert abs(pay.mean() - beta_reserve(0.5, 0.25, 2, 1, U)) < 3 * pay.std() / np.sqrt(pay.size)


def test_beta_reserve_limits():
    v = np.linspace(0.05, 1.0, 20)
    assert np.allclose(beta_reserve(v, 1e-15, 3, 2, U), beta_trivial(v, 3, 2, U), atol=1e-12)
    assert beta_reserve(0.25 + 1e-9, 0.25, 3, 2, U) == pytest.approx(0.25, abs=1e-8)
    with pytest.raises(ValueError):
        beta_reserve(0.2, 0.25, 3, 2, U)


def test_beta_reserve_bottom_of_support_limit():
    assert beta_reserve(1.0, 0.2, 3, 2, Pareto(1, 2)) == pytest.approx(1.0)


@given(st.floats(-5, 5))
def test_bisect_inverts_increasing(y):
    x = bisect_increasing(lambda z: z**3 + z, y, -3.0, 3.0)
    assert abs(x**3 + x - y) < 1e-10
