"""Closed-form exponents for late points of the planar torus walk.

Everything here is a pure function of its arguments. The quadratic rate
function ``F_{h,beta}`` drives all the exponents; the pair exponents are
available both in closed form and through the variational problems they
solve, so each can be checked against the other.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

KINDS = ("late_count", "fixed_disc", "late_disc", "pair_rho", "pair_rho_hat")

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
SUP_GRID_POINTS = 4096
SUP_GOLDEN_STEPS = 40


class Kind(str, Enum):
    LATE_COUNT = "late_count"
    FIXED_DISC = "fixed_disc"
    LATE_DISC = "late_disc"
    PAIR_RHO = "pair_rho"
    PAIR_RHO_HAT = "pair_rho_hat"


@dataclass(frozen=True)
class RateParams:
    h: float
    beta: float
    gamma: float

    def __post_init__(self):
        _check_beta(self.beta)
        if not self.gamma >= 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if not self.h >= 0:
            raise ValueError(f"h must be >= 0, got {self.h}")


@dataclass(frozen=True)
class GammaWindow:
    gamma_minus: float
    gamma_plus: float

    def __contains__(self, gamma: float) -> bool:
        return self.gamma_minus <= gamma <= self.gamma_plus


@dataclass(frozen=True)
class LambdaPoint:
    lambda_star: float
    lambda_hg: float


@dataclass(frozen=True)
class ExponentPrediction:
    kind: Kind
    alpha: float
    beta: float | None
    value: float


@dataclass(frozen=True)
class Interval:
    """Closed interval ``[lo, hi]``; ``hi`` may be ``math.inf``."""

    lo: float
    hi: float

    def __contains__(self, v: float) -> bool:
        return self.lo <= v <= self.hi


def _check_unit(name, v):
    if not 0.0 < v < 1.0:
        raise ValueError(f"{name} must lie in (0, 1), got {v}")


def _check_beta(beta):
    _check_unit("beta", beta)


def rate_function(p: RateParams) -> float:
    """``F_{h,beta}(gamma) = (1 - gamma*beta)^2 / (1 - beta) + h*gamma^2*beta``."""
    b, g = p.beta, p.gamma
    return (1.0 - g * b) ** 2 / (1.0 - b) + p.h * g * g * b


def rate(h: float, beta: float, gamma: float) -> float:
    return rate_function(RateParams(h, beta, gamma))


def gamma_min(h: float, beta: float) -> float:
    """Minimiser of ``gamma -> F_{h,beta}(gamma)``."""
    _check_beta(beta)
    if h < 0:
        raise ValueError(f"h must be >= 0, got {h}")
    return 1.0 / (h * (1.0 - beta) + beta)


def gamma_window(alpha: float, beta: float) -> GammaWindow:
    """Interval of ratios gamma with ``2 - 2*beta - 2*alpha*F_{0,beta}(gamma) >= 0``."""
    _check_unit("alpha", alpha)
    _check_beta(beta)
    s = (1.0 - beta) / math.sqrt(alpha)
    return GammaWindow(max(1.0 - s, 0.0) / beta, max(1.0 + s, 0.0) / beta)


def window_margin(alpha: float, beta: float, gamma: float) -> float:
    """Left side of the window's defining inequality; nonnegative exactly inside."""
    return 2.0 - 2.0 * beta - 2.0 * alpha * rate(0.0, beta, gamma)


def rho_closed(alpha: float, beta: float) -> float:
    """Typical pair-count exponent, piecewise closed form."""
    _check_unit("alpha", alpha)
    _check_beta(beta)
    s = math.sqrt(alpha)
    if beta <= 2.0 * (1.0 - s):
        return 2.0 + 2.0 * beta - 4.0 * alpha / (2.0 - beta)
    return 8.0 * (1.0 - s) - 4.0 * (1.0 - s) ** 2 / beta


def rho_constrained(alpha: float, beta: float) -> float:
    """Typical pair-count exponent from the constrained infimum of ``F_{2,beta}``.

    ``F_{2,beta}`` is a convex quadratic, so its infimum over the window is
    attained at the unconstrained minimiser clamped into the window.
    """
    w = gamma_window(alpha, beta)
    g = min(max(gamma_min(2.0, beta), w.gamma_minus), w.gamma_plus)
    return 2.0 + 2.0 * beta - 2.0 * alpha * rate(2.0, beta, g)


def rho_hat_closed(alpha: float, beta: float) -> float:
    """Mean pair-count exponent, piecewise closed form."""
    _check_unit("alpha", alpha)
    _check_beta(beta)
    s = math.sqrt(2.0 * alpha)
    if beta <= 2.0 - s:
        return 2.0 + 2.0 * beta - 4.0 * alpha / (2.0 - beta)
    return 6.0 - 4.0 * s


def _unconstrained_pair_profile(alpha, beta_p):
    # sup over gamma of 2 + 2b - 2a F_{2,b}(gamma); min F_{2,b} = 2/(2-b)
    return 2.0 + 2.0 * beta_p - 2.0 * alpha * 2.0 / (2.0 - beta_p)


def rho_hat_sup(alpha: float, beta: float,
                grid_points: int = SUP_GRID_POINTS,
                golden_steps: int = SUP_GOLDEN_STEPS) -> float:
    """Mean pair-count exponent as a supremum over ``beta' <= beta``.

    The inner supremum over gamma is the quadratic's minimum; the outer one
    is located on a uniform grid over ``(0, beta]`` and then polished by
    golden-section search on the bracketing cells.
    """
    _check_unit("alpha", alpha)
    _check_beta(beta)
    step = beta / grid_points
    best_i, best = 1, -math.inf
    for i in range(1, grid_points + 1):
        v = _unconstrained_pair_profile(alpha, i * step)
        if v > best:
            best_i, best = i, v
    lo = max((best_i - 1) * step, 0.0)
    hi = min((best_i + 1) * step, beta)
    f = lambda b: _unconstrained_pair_profile(alpha, b)  # noqa: E731
    c = hi - _GOLDEN * (hi - lo)
    d = lo + _GOLDEN * (hi - lo)
    fc, fd = f(c), f(d)
    for _ in range(golden_steps):
        if fc > fd:
            hi, d, fd = d, c, fc
            c = hi - _GOLDEN * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + _GOLDEN * (hi - lo)
            fd = f(d)
    return max(best, fc, fd, f(beta))


def predicted_exponent(kind, alpha: float, beta: float | None = None) -> float:
    """Limit of ``log(statistic) / log n`` for the statistic named by ``kind``."""
    kind = Kind(kind)
    _check_unit("alpha", alpha)
    if kind is Kind.LATE_COUNT:
        return 2.0 * (1.0 - alpha)
    if beta is None:
        raise ValueError(f"kind {kind.value!r} requires beta")
    _check_beta(beta)
    if kind is Kind.FIXED_DISC:
        return max(2.0 * beta - 2.0 * alpha / beta, 0.0)
    if kind is Kind.LATE_DISC:
        return 2.0 * beta * (1.0 - alpha)
    if kind is Kind.PAIR_RHO:
        return rho_closed(alpha, beta)
    return rho_hat_closed(alpha, beta)


def prediction(kind, alpha, beta=None) -> ExponentPrediction:
    kind = Kind(kind)
    b = None if kind is Kind.LATE_COUNT else beta
    return ExponentPrediction(kind, alpha, b, predicted_exponent(kind, alpha, b))


def lambda_star(h: float, beta: float) -> float:
    return 1.0 / (1.0 - beta) + h / beta


def lambda_hg(h: float, beta: float, gamma: float) -> float:
    return (beta + h * (1.0 - beta) - 1.0 / gamma) / (beta * (1.0 - beta))


def lambda_identity(p: RateParams) -> tuple[LambdaPoint, float]:
    """Tilt parameter for ``p`` and the residual of the tilted form of ``F``.

    Returns ``(LambdaPoint, residual)`` where the residual is
    ``|F - (lam*g^2*b^2 - (b*lam - h)/(b - (1-b)(lam*b - h)))|``.
    """
    h, b, g = p.h, p.beta, p.gamma
    if g <= 0:
        raise ValueError("gamma must be > 0")
    star = lambda_star(h, b)
    lam = lambda_hg(h, b, g)
    if not lam < star:
        raise ValueError(f"lambda_hg={lam} is not below lambda_star={star}")
    denom = b - (1.0 - b) * (lam * b - h)
    if denom == 0.0:
        raise ZeroDivisionError("degenerate denominator in the tilted form")
    tilted = lam * g * g * b * b - (b * lam - h) / denom
    return LambdaPoint(star, lam), abs(rate_function(p) - tilted)


def deviation_interval(h: float, gamma: float, beta: float) -> Interval:
    """Deviation set of the normalised excursion count around ``gamma``."""
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    gh = gamma_min(h, beta)
    if gamma < gh:
        return Interval(0.0, gamma * gamma)
    if gamma == gh:
        return Interval(0.0, math.inf)
    return Interval(gamma * gamma, math.inf)


def theory_rows(alphas, betas):
    """Rows ``(alpha, beta, kind, value)`` for every kind and grid point."""
    rows = []
    for a in alphas:
        rows.append((a, None, Kind.LATE_COUNT.value, predicted_exponent(Kind.LATE_COUNT, a)))
        for b in betas:
            for kind in KINDS[1:]:
                rows.append((a, b, kind, predicted_exponent(kind, a, b)))
    return rows


def rho_curves(alpha: float, samples: int = 512):
    """``(beta, rho, rho_hat)`` sampled on a uniform open grid over (0, 1)."""
    out = []
    for i in range(1, samples + 1):
        b = i / (samples + 1)
        out.append((b, rho_closed(alpha, b), rho_hat_closed(alpha, b)))
    return out
