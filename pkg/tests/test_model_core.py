import json
import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from reservebarrier.barrier_solver import solve_barrier
from reservebarrier.errors import ConfigError, DomainOverflow, ParameterError
from reservebarrier.model_core import (
    ModelParams,
    ValidatedParams,
    characteristic_exponents,
    compute_roots,
    excess_from_deposits,
    g,
    g_double_prime,
    g_prime,
    generator,
    load_params,
    params_from_mapping,
    validate_params,
)

from conftest import DERIVED, quad_residual, valid_params


def make(**kw):
    return ModelParams(**{**DERIVED, **kw})


# -- validation ------------------------------------------------------------

def test_derived_params_validate(derived):
    assert isinstance(derived, ValidatedParams)
    assert derived.r == pytest.approx(0.04 / 0.05 - 0.005, abs=1e-15)
    assert derived.c == pytest.approx(0.04 / 0.05 + 0.5 * 0.01, abs=1e-15)


@pytest.mark.parametrize("kw, code", [
    (dict(sigma=0.0), "NonPositiveSigma"),
    (dict(sigma=-1.0), "NonPositiveSigma"),
    (dict(lambda2=0.0), "NonPositiveDiscount"),
    (dict(lambda1=0.02, lambda2=0.03), "DiscountOrderViolation"),
    (dict(h=0.0), "NonPositiveHoldingCost"),
    (dict(alpha=-0.01), "NegativeTransactionCost"),
    (dict(beta=-0.01), "NegativeTransactionCost"),
    (dict(n=1.5), "MixingWeightOutOfRange"),
    (dict(n=-0.1), "MixingWeightOutOfRange"),
    (dict(q=1.0), "ReserveRatioOutOfRange"),
    (dict(beta=0.9), "RNonPositive"),
    (dict(mu=math.nan), "NonFiniteValue"),
    (dict(sigma=math.inf), "NonFiniteValue"),
])
def test_invalid_params_report_code(kw, code):
    with pytest.raises(ParameterError) as exc:
        validate_params(make(**kw))
    assert code in exc.value.codes


def test_all_failures_reported_together():
    with pytest.raises(ParameterError) as exc:
        validate_params(make(sigma=-1.0, h=-1.0, n=2.0))
    assert {"NonPositiveSigma", "NonPositiveHoldingCost", "MixingWeightOutOfRange"} <= set(exc.value.codes)


def test_equal_discount_rates_allowed():
    p = validate_params(make(lambda1=0.03, lambda2=0.03))
    assert p.lambda1 == p.lambda2


def test_validate_is_idempotent(derived):
    assert validate_params(derived) is derived
    assert derived.raw() == ModelParams(**DERIVED)


@given(valid_params())
def test_validate_idempotent_property(p):
    again = validate_params(p.raw())
    assert again == p and validate_params(again) is again


# -- config ingestion ------------------------------------------------------

def test_params_from_mapping_roundtrip(tmp_path):
    path = tmp_path / "p.json"
    path.write_text(json.dumps(DERIVED))
    assert load_params(path) == validate_params(make())
    assert params_from_mapping({**DERIVED, "q": 0.1}).q == 0.1


@pytest.mark.parametrize("doc", [
    {**DERIVED, "sgima": 0.3},
    {k: v for k, v in DERIVED.items() if k != "h"},
    {**DERIVED, "mu": "fast"},
    {**DERIVED, "n": True},
])
def test_params_from_mapping_rejects(doc):
    with pytest.raises(ConfigError):
        params_from_mapping(doc)


@pytest.mark.parametrize("d, q, x", [(100, 0.1, 90), (0, 0.1, 0), (50, 0, 50)])
def test_excess_from_deposits(d, q, x):
    assert excess_from_deposits(d, q) == pytest.approx(x, abs=1e-12)


def test_excess_from_deposits_rejects():
    with pytest.raises(ValueError):
        excess_from_deposits(-1, 0.1)
    with pytest.raises(ValueError):
        excess_from_deposits(1, 1.0)


# -- roots -----------------------------------------------------------------

def test_symmetric_roots():
    roots = compute_roots(validate_params(ModelParams(0.0, 1.0, 0.5, 0.5, 1.0, 0.0, 0.0, 0.5)))
    assert roots.gamma1 == pytest.approx(1.0, abs=1e-15)
    assert roots.gamma_bar1 == pytest.approx(1.0, abs=1e-15)
    assert roots.gamma2 == pytest.approx(1.0, abs=1e-15)
    decay, growth = characteristic_exponents(0.0, math.sqrt(2.0), 1.0)
    assert decay == pytest.approx(1.0, abs=1e-15) and growth == pytest.approx(1.0, abs=1e-15)


def test_drift_root_residuals():
    decay, growth = characteristic_exponents(0.1, 0.2, 0.05)
    # gamma1 solves s^2 sigma^2/2 - mu s - lam, gamma_bar1 the + mu version
    assert abs(quad_residual(decay, 0.1, 0.2, 0.05, -1)) < 1e-12
    assert abs(quad_residual(growth, 0.1, 0.2, 0.05, +1)) < 1e-12


def test_derived_roots(derived):
    roots = compute_roots(derived)
    s = math.sqrt(0.05 ** 2 + 2 * 0.09 * 0.05)
    assert roots.gamma1 == pytest.approx((s - 0.05) / 0.09, rel=1e-14)
    assert roots.gamma_bar1 == pytest.approx((s + 0.05) / 0.09, rel=1e-14)
    s2 = math.sqrt(0.05 ** 2 + 2 * 0.09 * 0.03)
    assert roots.gamma2 == pytest.approx((s2 - 0.05) / 0.09, rel=1e-14)


@given(valid_params())
def test_root_residuals(p):
    roots = compute_roots(p)
    assert roots.gamma1 > 0 and roots.gamma_bar1 > 0 and roots.gamma2 > 0
    for gam, lam, sign in [(roots.gamma1, p.lambda1, -1), (roots.gamma_bar1, p.lambda1, 1),
                           (roots.gamma2, p.lambda2, -1)]:
        scale = 1 + lam + 0.5 * p.sigma ** 2 * gam ** 2
        assert abs(quad_residual(gam, p.mu, p.sigma, lam, sign)) <= 1e-12 * scale


@given(st.floats(-5, 5), st.floats(0.01, 3), st.floats(1e-8, 1e-3))
def test_exponents_no_cancellation(mu, sigma, lam):
    decay, growth = characteristic_exponents(mu, sigma, lam)
    # product of the roots is exactly 2 lam / sigma^2
    assert decay * growth == pytest.approx(2 * lam / sigma ** 2, rel=1e-12)
    assert decay > 0 and growth > 0


@given(valid_params())
def test_gamma2_eigenfunction(p):
    gam = compute_roots(p).gamma2
    x = np.linspace(0, 5, 11)
    f = np.exp(-gam * x)
    gen = generator(-gam * f, gam ** 2 * f, p.mu, p.sigma)
    assert np.max(np.abs(gen - p.lambda2 * f)) <= 1e-10 * (1 + gam ** 2)


# -- g ---------------------------------------------------------------------

def test_g_at_zero(derived):
    roots = compute_roots(derived)
    assert g(0.0, roots) == pytest.approx(roots.gamma1 + roots.gamma_bar1, rel=1e-15)
    assert abs(g_prime(0.0, roots)) <= 1e-14 * g(0.0, roots)
    assert g(-1.0, roots) > g(0.0, roots)


def test_g_generator_identity_points(derived):
    roots = compute_roots(derived)
    for x in (-1.0, 0.0, 0.5):
        gen = generator(g_prime(x, roots), g_double_prime(x, roots), derived.mu, derived.sigma)
        assert abs(gen - derived.lambda1 * g(x, roots)) <= 1e-10 * derived.lambda1 * g(x, roots)


@given(valid_params())
def test_g_generator_identity_grid(p):
    roots = compute_roots(p)
    b = solve_barrier(p).b
    assume(max(roots.gamma1, roots.gamma_bar1) * b < 700)  # g itself overflows beyond
    x = np.linspace(-b, b, 100)
    gen = generator(g_prime(x, roots), g_double_prime(x, roots), p.mu, p.sigma)
    assert np.all(np.abs(gen - p.lambda1 * g(x, roots)) <= 1e-10 * p.lambda1 * g(x, roots))


@given(valid_params(), st.floats(1e-3, 1.0), st.floats(1e-3, 1.0))
def test_g_strictly_decreasing_on_negative_axis(p, a, frac):
    roots = compute_roots(p)
    x2 = a * 50 / roots.gamma1
    x1 = frac * x2 * 0.999
    assert g(-x1, roots) < g(-x2, roots)


def test_g_derivatives_match_finite_differences(derived):
    roots = compute_roots(derived)
    hstep = 1e-6
    for x in (-2.0, -0.3, 0.0, 0.7):
        fd1 = (g(x + hstep, roots) - g(x - hstep, roots)) / (2 * hstep)
        fd2 = (g_prime(x + hstep, roots) - g_prime(x - hstep, roots)) / (2 * hstep)
        assert fd1 == pytest.approx(g_prime(x, roots), rel=1e-6, abs=1e-8)
        assert fd2 == pytest.approx(g_double_prime(x, roots), rel=1e-6)


def test_g_overflow(derived):
    roots = compute_roots(derived)
    with pytest.raises(DomainOverflow):
        g(-1e4, roots)
    with pytest.raises(DomainOverflow):
        g(1e4, roots)


def test_g_vectorized(derived):
    roots = compute_roots(derived)
    xs = np.array([-1.0, 0.0, 1.0])
    assert np.allclose(g(xs, roots), [g(float(x), roots) for x in xs], rtol=0, atol=0)
