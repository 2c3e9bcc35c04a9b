import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import optimize

from latepoints import theory
from latepoints.theory import (
    Kind, RateParams, deviation_interval, gamma_min, gamma_window, lambda_hg,
    lambda_identity, lambda_star, predicted_exponent, rate, rate_function, rho_closed,
    rho_constrained, rho_curves, rho_hat_closed, rho_hat_sup, theory_rows, window_margin,
)

unit = st.floats(0.01, 0.99)
hs = st.floats(0.0, 2.0)


# independent oracles -------------------------------------------------------

def window_by_roots(alpha, beta):
    """Window endpoints by bracketing roots of the margin (no closed form)."""
    f = lambda g: window_margin(alpha, beta, g)
    center = 1.0 / beta  # margin is maximal there and equals 2 - 2*beta > 0
    far = 2 * center
    while f(far) >= 0:
        far *= 2
    hi = optimize.brentq(f, center, far, xtol=1e-15)
    lo = 0.0 if f(0.0) >= 0 else optimize.brentq(f, 0.0, center, xtol=1e-15)
    return lo, hi


def rho_by_bounded_search(alpha, beta):
    lo, hi = window_by_roots(alpha, beta)
    res = optimize.minimize_scalar(lambda g: rate(2.0, beta, g), bounds=(lo, hi),
                                   method="bounded", options={"xatol": 1e-12})
    # convex objective: the minimum is the stationary point or an endpoint
    best = min(res.fun, rate(2.0, beta, lo), rate(2.0, beta, hi))
    return 2 + 2 * beta - 2 * alpha * best


# rate function ------------------------------------------------------------

@pytest.mark.parametrize("h,beta,gamma,expected", [
    (2.0, 0.5, 1.0, 1.5),
    (0.0, 0.4, 2.5, 0.0),
    (1.0, 0.5, 2.0, 2.0),
])
def test_rate_function_values(h, beta, gamma, expected):
    assert rate_function(RateParams(h, beta, gamma)) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("h,beta,gamma", [(0, 0, 1), (0, 1, 1), (0, 0.5, -0.1), (-1, 0.5, 1)])
def test_rate_params_domain(h, beta, gamma):
    with pytest.raises(ValueError):
        RateParams(h, beta, gamma)


@pytest.mark.parametrize("h,beta,expected", [(0.0, 0.25, 4.0), (1.0, 0.7, 1.0), (2.0, 0.5, 2 / 3)])
def test_gamma_min_values(h, beta, expected):
    assert gamma_min(h, beta) == pytest.approx(expected, rel=1e-15)


def test_gamma_min_two_value():
    assert rate(2.0, 0.5, gamma_min(2.0, 0.5)) == pytest.approx(4 / 3, rel=1e-15)


@given(hs, unit)
def test_rate_minimised_at_gamma_min(h, beta):
    g = gamma_min(h, beta)
    eps = 1e-5
    deriv = (rate(h, beta, g + eps) - rate(h, beta, g - eps)) / (2 * eps)
    assert abs(deriv) <= 1e-8 * max(1.0, 1.0 / beta)
    second = rate(h, beta, g + 0.1) - 2 * rate(h, beta, g) + rate(h, beta, g - 0.1)
    assert second > 0
    assert rate(h, beta, g + 0.1) > rate(h, beta, g)


# gamma window -------------------------------------------------------------

def test_gamma_window_values():
    w = gamma_window(0.25, 0.5)
    assert (w.gamma_minus, w.gamma_plus) == pytest.approx(window_by_roots(0.25, 0.5), abs=1e-9)
    assert (w.gamma_minus, w.gamma_plus) == pytest.approx((0.0, 4.0), abs=1e-12)
    assert gamma_window(0.49, 0.3).gamma_minus == 0.0


def test_gamma_window_narrows_as_alpha_grows():
    beta = 0.4
    wins = [gamma_window(a, beta) for a in (0.5, 0.9, 0.99, 1 - 1e-9)]
    widths = [w.gamma_plus - w.gamma_minus for w in wins]
    assert all(w.gamma_minus < 1 / beta < w.gamma_plus for w in wins)
    assert widths == sorted(widths, reverse=True)
    # the limit is [1, (2 - beta)/beta], not the single point 1/beta
    assert (wins[-1].gamma_minus, wins[-1].gamma_plus) == pytest.approx((1.0, (2 - beta) / beta),
                                                                        abs=1e-8)


@given(unit, unit)
def test_gamma_window_matches_margin(alpha, beta):
    w = gamma_window(alpha, beta)
    for g in (w.gamma_minus, w.gamma_plus):
        if g > 0:
            assert abs(window_margin(alpha, beta, g)) <= 1e-9
    assert window_margin(alpha, beta, 0.5 * (w.gamma_minus + w.gamma_plus)) >= 0
    assert window_margin(alpha, beta, w.gamma_plus * 1.001 + 1e-6) < 0


# pair exponents -----------------------------------------------------------

def test_rho_closed_examples():
    assert rho_closed(0.25, 0.5) == pytest.approx(7 / 3, rel=1e-15)
    assert rho_closed(0.5, 0.9) == pytest.approx(rho_by_bounded_search(0.5, 0.9), abs=1e-7)
    s = math.sqrt(0.5)
    assert rho_closed(0.5, 0.9) == pytest.approx(8 * (1 - s) - 4 * (1 - s) ** 2 / 0.9, rel=1e-14)
    assert rho_closed(0.5, 0.9) == pytest.approx(1.9618, abs=1e-4)


@given(st.floats(0.01, 0.98))
def test_rho_closed_continuous_at_branch(alpha):
    b = 2 * (1 - math.sqrt(alpha))
    if not 0 < b < 1:
        return
    assert rho_closed(alpha, b) == pytest.approx(6 - 6 * math.sqrt(alpha), abs=1e-12)
    assert rho_closed(alpha, b - 1e-9) == pytest.approx(rho_closed(alpha, b + 1e-9), abs=1e-7)


def test_rho_constrained_examples():
    assert rho_constrained(0.25, 0.5) == pytest.approx(7 / 3, rel=1e-14)
    assert gamma_window(0.5, 0.9).gamma_minus > 1 / (2 - 0.9)
    assert rho_constrained(0.5, 0.9) == pytest.approx(rho_closed(0.5, 0.9), abs=1e-12)


@given(unit, unit)
@settings(max_examples=60)
def test_rho_matches_bounded_search(alpha, beta):
    assert rho_closed(alpha, beta) == pytest.approx(rho_by_bounded_search(alpha, beta), abs=1e-7)


def test_rho_hat_examples():
    assert rho_hat_closed(0.5, 0.9) == pytest.approx(2 + 1.8 - 2 / 1.1, rel=1e-15)
    assert rho_hat_sup(0.5, 0.9) == pytest.approx(1.9818, abs=1e-4)
    # second branch is constant in beta
    a = 0.9
    b0 = 2 - math.sqrt(2 * a)
    assert rho_hat_closed(a, b0 + 0.05) == pytest.approx(6 - 4 * math.sqrt(2 * a), rel=1e-14)
    assert rho_hat_closed(a, 0.99) == rho_hat_closed(a, b0 + 0.05)


def test_rho_hat_sup_attained_at_beta_when_increasing():
    alpha, beta = 0.125, 0.95
    assert 2 - math.sqrt(2 * alpha) > beta
    deriv = 2 - 4 * alpha / (2 - beta) ** 2
    assert deriv > 0
    assert rho_hat_sup(alpha, beta) == pytest.approx(2 + 2 * beta - 4 * alpha / (2 - beta), abs=1e-12)


def test_rho_hat_sup_against_scipy():
    for alpha, beta in [(0.3, 0.9), (0.45, 0.99), (0.7, 0.8), (0.2, 0.4)]:
        prof = lambda bp: -(2 + 2 * bp - 4 * alpha / (2 - bp))
        res = optimize.minimize_scalar(prof, bounds=(1e-9, beta), method="bounded",
                                       options={"xatol": 1e-12})
        assert rho_hat_sup(alpha, beta) == pytest.approx(max(-res.fun, -prof(beta)), abs=1e-9)


@given(unit, unit)
def test_rho_hat_dominates_rho(alpha, beta):
    r, rh = rho_closed(alpha, beta), rho_hat_closed(alpha, beta)
    assert rh >= r - 1e-12
    if beta <= 2 * (1 - math.sqrt(alpha)):
        assert rh == pytest.approx(r, abs=1e-9)


@given(unit)
def test_rho_nondecreasing_in_beta(alpha):
    betas = np.arange(1, 1000) / 1000
    vals = np.array([rho_closed(alpha, b) for b in betas])
    assert np.all(np.diff(vals) >= -1e-12)


@given(unit, unit)
def test_rho_lower_bound(alpha, beta):
    assert rho_closed(alpha, beta) >= 2 * (1 - alpha) + 2 * beta * (1 - alpha) - 1e-12


# predictions --------------------------------------------------------------

def test_predicted_exponent_examples():
    assert predicted_exponent(Kind.LATE_COUNT, 0.5) == 1.0
    assert predicted_exponent("fixed_disc", 0.49, 0.5) == 0.0
    assert predicted_exponent("late_disc", 0.3, 0.7) == pytest.approx(0.98, rel=1e-14)
    assert predicted_exponent("pair_rho", 0.3, 0.3) == rho_closed(0.3, 0.3)
    assert predicted_exponent("pair_rho_hat", 0.3, 0.9) == rho_hat_closed(0.3, 0.9)
    with pytest.raises(ValueError):
        predicted_exponent("late_disc", 0.3)


@given(unit, unit)
def test_predicted_ordering(alpha, beta):
    f = predicted_exponent("fixed_disc", alpha, beta)
    ld = predicted_exponent("late_disc", alpha, beta)
    assert 0 <= f <= ld + 1e-12 <= 2 * beta + 1e-12
    assert predicted_exponent("pair_rho", alpha, beta) <= \
        predicted_exponent("pair_rho_hat", alpha, beta) + 1e-12


def test_theory_rows_and_curves():
    rows = theory_rows([0.25], [0.5])
    assert rows[0] == (0.25, None, "late_count", 1.5)
    assert {r[2] for r in rows} == set(theory.KINDS)
    curves = rho_curves(0.5, 512)
    assert len(curves) == 512
    assert all(0 < b < 1 and rh >= r - 1e-12 for b, r, rh in curves)


# lambda identity ----------------------------------------------------------

def test_lambda_identity_example():
    point, resid = lambda_identity(RateParams(1.0, 0.5, 2.0))
    assert point.lambda_hg == pytest.approx(2.0, rel=1e-15)
    assert point.lambda_star == pytest.approx(4.0, rel=1e-15)
    assert resid <= 1e-15


@given(hs, unit)
def test_lambda_sign_at_gamma_min(h, beta):
    g = gamma_min(h, beta)
    assert lambda_hg(h, beta, g) == pytest.approx(0.0, abs=1e-12 * (1 + h / beta))
    assert lambda_hg(h, beta, 0.9 * g) < 0 < lambda_hg(h, beta, 1.1 * g)


def test_lambda_identity_needs_positive_gamma():
    with pytest.raises(ValueError):
        lambda_identity(RateParams(1.0, 0.5, 0.0))


@given(hs, unit, st.floats(1e-3, 50.0))
def test_lambda_below_star(h, beta, gamma):
    # lambda_hg = lambda_star - 1/(gamma*beta*(1-beta))
    gap = lambda_star(h, beta) - lambda_hg(h, beta, gamma)
    assert gap == pytest.approx(1 / (gamma * beta * (1 - beta)), rel=1e-9)


def test_lambda_star_formula():
    assert lambda_star(2.0, 0.5) == pytest.approx(2 + 4)


# deviation interval ---------------------------------------------------------

def test_deviation_interval_cases():
    i = deviation_interval(1.0, 0.5, 0.5)
    assert (i.lo, i.hi) == (0.0, 0.25)
    i = deviation_interval(1.0, 1.0, 0.3)
    assert (i.lo, i.hi) == (0.0, math.inf)
    i = deviation_interval(0.0, 3.0, 0.5)
    assert (i.lo, i.hi) == (9.0, math.inf)
