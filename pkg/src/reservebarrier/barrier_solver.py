"""Optimal upper barrier, closed-form value functions and optimality checks.

The barrier ``b`` solves ``g(-b) = g(0) c / r``.  On ``[0, b]`` the lambda1 part
of the gain is

    v1(x) = r/g'(b) g(x) + c/g'(-b) g(x - b)

and above ``b`` it continues linearly with slope ``r``.  The lambda2 part is
``v2(x) = -(1-n) alpha exp(-gamma2 x) / gamma2``.

``v2`` is the discounted purchase value of reflection at 0 *without* an upper
barrier.  For the two-sided barrier policy the exact purchase term is
:func:`band_control_values`; :func:`barrier_gain_exact` uses it and is what the
Monte Carlo estimator converges to.  The two differ whenever ``n < 1``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BracketOverflow, NegativeState
from .model_core import (
    RootSet,
    ValidatedParams,
    characteristic_exponents,
    compute_roots,
    g,
    validate_params,
)


@dataclass(frozen=True)
class PolicySolution:
    b: float
    coef_upper: float
    coef_lower: float
    r: float
    c: float
    roots: RootSet
    residual: float
    # coefficients rescaled by exp(gamma_bar1 b) and exp(gamma1 b); what v1 evaluates with
    scaled_upper: float = math.nan
    scaled_lower: float = math.nan

    def to_dict(self) -> dict:
        finite = lambda v: v if math.isfinite(v) else None  # noqa: E731
        return {
            "b": self.b,
            "r": self.r,
            "c": self.c,
            "gamma1": self.roots.gamma1,
            "gamma_bar1": self.roots.gamma_bar1,
            "gamma2": self.roots.gamma2,
            "coef_upper": finite(self.coef_upper),
            "coef_lower": finite(self.coef_lower),
            "scaled_upper": finite(self.scaled_upper),
            "scaled_lower": finite(self.scaled_lower),
            "residual": self.residual,
        }


def _barrier_gap(b: float, roots: RootSet, target: float) -> float:
    return g(-b, roots) - target


def solve_barrier(params: ValidatedParams) -> PolicySolution:
    """Solve ``g(-b) = g(0) c/r`` for the unique ``b >= 0``.

    The upper bracket doubles from 1 until ``g(-b_hi)`` exceeds the target, then
    plain bisection runs down to width ``1e-14 * max(1, b)``.
    """
    p = validate_params(params)
    roots = compute_roots(p)
    r, c = p.r, p.c
    target = g(0.0, roots) * c / r

    if c == r:
        b = 0.0
    else:
        lo, hi = 0.0, 1.0
        try:
            while _barrier_gap(hi, roots, target) <= 0.0:
                lo, hi = hi, 2.0 * hi
        except OverflowError as exc:
            raise BracketOverflow(f"no bracket below b={hi:.6g}") from exc
        while hi - lo > 1e-14 * max(1.0, lo):
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            if _barrier_gap(mid, roots, target) > 0.0:
                hi = mid
            else:
                lo = mid
        # keep whichever end has the smaller residual
        b = lo if abs(_barrier_gap(lo, roots, target)) <= abs(_barrier_gap(hi, roots, target)) else hi

    residual = abs(_barrier_gap(b, roots, target))
    if b > 0.0:
        d = _shifted_slope(b, roots.gamma1, roots.gamma_bar1)
        scaled_upper, scaled_lower = r / d, -c / d
        # plain coefficients may underflow to 0 for wide bands; informational only
        coef_upper = scaled_upper * math.exp(-roots.gamma_bar1 * b)
        coef_lower = scaled_lower * math.exp(-roots.gamma1 * b)
    else:
        coef_upper = coef_lower = scaled_upper = scaled_lower = math.nan
    return PolicySolution(b=b, coef_upper=coef_upper, coef_lower=coef_lower,
                          r=r, c=c, roots=roots, residual=residual,
                          scaled_upper=scaled_upper, scaled_lower=scaled_lower)


def _state(x):
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0):
        raise NegativeState(f"reserve level must be >= 0, got min {float(np.min(arr))}")
    return arr


def _shifted_slope(b: float, decay: float, growth: float) -> float:
    # g'(b) = exp(growth b) D and g'(-b) = -exp(decay b) D with this D
    return decay * growth * -math.expm1(-(decay + growth) * b)


def _shifted_g(x, b: float, decay: float, growth: float, order: int):
    """``exp(-growth b) g(x)`` and ``exp(-decay b) g(x - b)`` (or derivatives) for
    ``0 <= x <= b``; every exponent is non-positive so nothing overflows."""
    w_up = decay * growth ** order
    w_down = growth * (-decay) ** order
    up = np.exp(growth * (x - b))
    down = np.exp(-decay * x)
    upper = w_up * up + w_down * down * math.exp(-growth * b)
    lower = w_up * up * math.exp(-decay * b) + w_down * down
    return upper, lower


def _band_part(x, sol: PolicySolution, order: int):
    upper, lower = _shifted_g(np.asarray(x, dtype=float), sol.b, sol.roots.gamma1,
                              sol.roots.gamma_bar1, order)
    return sol.scaled_upper * upper + sol.scaled_lower * lower


def _zero_band_v1_at_zero(sol: PolicySolution, mu: float, lambda1: float) -> float:
    # b -> 0 limit of v1(0): the band [0, 0] pins Z at 0 and U - L = X - x
    return sol.r * mu / lambda1


def _as_output(arr):
    return float(arr) if np.ndim(arr) == 0 else arr


def v1(x, sol: PolicySolution, params: ValidatedParams | None = None):
    """Lambda1 part of the optimal gain.  ``params`` is needed only when b = 0."""
    xs = _state(x)
    if sol.b == 0.0:
        if params is None:
            raise ValueError("params required to evaluate v1 when b = 0")
        return _as_output(_zero_band_v1_at_zero(sol, params.mu, params.lambda1) + sol.r * xs)
    inside = np.minimum(xs, sol.b)
    at_band = _band_part(inside, sol, 0)
    return _as_output(at_band + sol.r * (xs - inside))


def v1_prime(x, sol: PolicySolution):
    xs = _state(x)
    if sol.b == 0.0:
        return _as_output(np.full_like(xs, sol.r))
    inside = np.minimum(xs, sol.b)
    return _as_output(np.where(xs > sol.b, sol.r, _band_part(inside, sol, 1)))


def v1_double_prime(x, sol: PolicySolution):
    """Second derivative; the value at ``x = b`` is the left limit."""
    xs = _state(x)
    if sol.b == 0.0:
        return _as_output(np.zeros_like(xs))
    inside = np.minimum(xs, sol.b)
    return _as_output(np.where(xs > sol.b, 0.0, _band_part(inside, sol, 2)))


def v2(x, params: ValidatedParams, roots: RootSet):
    xs = _state(x)
    k = (1.0 - params.n) * params.alpha
    return _as_output(-(k / roots.gamma2) * np.exp(-roots.gamma2 * xs))


def v2_prime(x, params: ValidatedParams, roots: RootSet):
    xs = _state(x)
    k = (1.0 - params.n) * params.alpha
    return _as_output(k * np.exp(-roots.gamma2 * xs))


def v2_double_prime(x, params: ValidatedParams, roots: RootSet):
    xs = _state(x)
    k = (1.0 - params.n) * params.alpha
    return _as_output(-k * roots.gamma2 * np.exp(-roots.gamma2 * xs))


def gain_analytic(x, sol: PolicySolution, params: ValidatedParams):
    return _as_output(np.asarray(v1(x, sol, params)) + np.asarray(v2(x, params, sol.roots)))


def cost_analytic(x, sol: PolicySolution, params: ValidatedParams):
    """Cost ``h x/lambda1 + h mu/lambda1^2 - gain``."""
    xs = _state(x)
    p = params
    base = p.h * xs / p.lambda1 + p.h * p.mu / p.lambda1 ** 2
    return _as_output(base - np.asarray(gain_analytic(xs, sol, p)))


def band_control_values(x, b: float, mu: float, sigma: float, lam: float):
    """Exact ``(E_x int e^{-lam t} dL, E_x int e^{-lam t} dU)`` for reflection on ``[0, b]``.

    Both solve ``mu w' + sigma^2 w''/2 = lam w`` on the band with
    ``(w_L'(0), w_L'(b)) = (-1, 0)`` and ``(w_U'(0), w_U'(b)) = (0, 1)``; above
    ``b`` the initial sale ``x - b`` is added to ``w_U``.  Infinite for ``b = 0``.
    """
    xs = _state(x)
    if b <= 0.0:
        return _as_output(np.full_like(xs, math.inf)), _as_output(np.full_like(xs, math.inf))
    decay, growth = characteristic_exponents(mu, sigma, lam)
    inside = np.minimum(xs, b)
    d = _shifted_slope(b, decay, growth)
    upper, lower = _shifted_g(inside, b, decay, growth, 0)
    w_l = lower / d
    w_u = upper / d + (xs - inside)
    return _as_output(w_l), _as_output(w_u)


def barrier_gain_exact(x, sol: PolicySolution, params: ValidatedParams):
    """Gain of the barrier policy at ``sol.b`` with the exact two-sided purchase term."""
    p = params
    w_l2, _ = band_control_values(x, sol.b, p.mu, p.sigma, p.lambda2)
    return _as_output(np.asarray(v1(x, sol, p)) - (1.0 - p.n) * p.alpha * np.asarray(w_l2))


@dataclass
class ConditionCheck:
    name: str
    max_residual: float
    tolerance: float
    passed: bool

    def to_dict(self) -> dict:
        return {"name": self.name, "max_residual": self.max_residual,
                "tolerance": self.tolerance, "pass": self.passed}


@dataclass
class ConditionReport:
    checks: list[ConditionCheck] = field(default_factory=list)

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> ConditionCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_json(self, **kw) -> str:
        return json.dumps([c.to_dict() for c in self.checks], **kw)


def _add(report: ConditionReport, name: str, residual: float, tol: float) -> None:
    residual = float(residual)
    report.checks.append(ConditionCheck(name, residual, tol, bool(residual <= tol)))


def verify_conditions(sol: PolicySolution, params: ValidatedParams,
                      grid_size: int = 101) -> ConditionReport:
    """Check the pointwise conditions behind the supermartingale verification argument.

    Grids: ``grid_size`` points on the band ``[0, b]``, on ``(b, 3b]`` and on
    ``[0, 3b]`` (``[0, 3]`` when ``b = 0``).  Generator residuals are scaled by
    ``1 + lambda |v|``.
    """
    p = validate_params(params)
    roots = sol.roots
    b = sol.b
    top = 3.0 * b if b > 0 else 3.0
    band = np.linspace(0.0, b, grid_size)
    above = np.linspace(b, top, grid_size)[1:]
    full = np.linspace(0.0, top, grid_size)
    half_s2 = 0.5 * p.sigma ** 2
    report = ConditionReport()

    v = np.asarray(v1(band, sol, p))
    gen = p.mu * np.asarray(v1_prime(band, sol)) + half_s2 * np.asarray(v1_double_prime(band, sol))
    _add(report, "generator_v1_band",
         np.max(np.abs(gen - p.lambda1 * v) / (1.0 + p.lambda1 * np.abs(v))), 1e-10)

    v = np.asarray(v1(above, sol, p))
    gen = p.mu * np.asarray(v1_prime(above, sol)) + half_s2 * np.asarray(v1_double_prime(above, sol))
    _add(report, "generator_v1_above", max(0.0, float(np.max(gen - p.lambda1 * v))), 1e-10)

    d1 = np.asarray(v1_prime(full, sol))
    _add(report, "v1_prime_bounds",
         max(0.0, float(np.max(sol.r - d1)), float(np.max(d1 - sol.c))), 1e-12)

    w = np.asarray(v2(full, p, roots))
    gen = p.mu * np.asarray(v2_prime(full, p, roots)) + half_s2 * np.asarray(v2_double_prime(full, p, roots))
    _add(report, "generator_v2",
         np.max(np.abs(gen - p.lambda2 * w) / (1.0 + p.lambda2 * np.abs(w))), 1e-10)

    _add(report, "v2_prime_bound",
         max(0.0, float(np.max(np.asarray(v2_prime(full, p, roots)) - (1.0 - p.n) * p.alpha))), 1e-12)

    fit = max(abs(float(v1_prime(0.0, sol)) - sol.c), abs(float(v1_prime(b, sol)) - sol.r))
    _add(report, "smooth_fit", fit, 1e-10 * sol.c)

    # barrier equation <=> v1'' vanishes at b from the left
    if b > 0:
        upper, lower = _shifted_g(b, b, roots.gamma1, roots.gamma_bar1, 2)
        scale = abs(sol.scaled_upper * upper) + abs(sol.scaled_lower * lower)
        curv = abs(float(v1_double_prime(b, sol))) / scale
    else:
        curv = 0.0
    _add(report, "second_order_fit", curv, 1e-8)
    return report
