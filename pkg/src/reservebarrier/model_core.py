"""Model parameters, validation, characteristic roots and the function g.

The uncontrolled excess-reserve process is an arithmetic Brownian motion
``dX = mu dt + sigma dB``.  Everything downstream is built from the roots of
``sigma^2 s^2 / 2 + mu s - lam = 0`` for the two discount rates.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import ConfigError, DomainOverflow, ParameterError

# largest x with exp(x) finite in float64
_EXP_MAX = 709.78


@dataclass(frozen=True)
class ModelParams:
    mu: float
    sigma: float
    lambda1: float
    lambda2: float
    h: float
    alpha: float
    beta: float
    n: float
    q: float = 0.0


def _check(p: ModelParams) -> list[tuple[str, str]]:
    problems = []
    values = {f.name: getattr(p, f.name) for f in fields(ModelParams)}
    bad = [k for k, v in values.items() if not math.isfinite(v)]
    if bad:
        problems.append(("NonFiniteValue", ", ".join(bad)))
        return problems
    if p.sigma <= 0:
        problems.append(("NonPositiveSigma", f"sigma={p.sigma}"))
    if p.lambda2 <= 0 or p.lambda1 <= 0:
        problems.append(("NonPositiveDiscount", f"lambda1={p.lambda1}, lambda2={p.lambda2}"))
    elif p.lambda1 < p.lambda2:
        problems.append(("DiscountOrderViolation", f"lambda1={p.lambda1} < lambda2={p.lambda2}"))
    if p.h <= 0:
        problems.append(("NonPositiveHoldingCost", f"h={p.h}"))
    if p.alpha < 0 or p.beta < 0:
        problems.append(("NegativeTransactionCost", f"alpha={p.alpha}, beta={p.beta}"))
    if not 0.0 <= p.n <= 1.0:
        problems.append(("MixingWeightOutOfRange", f"n={p.n}"))
    if not 0.0 <= p.q < 1.0:
        problems.append(("ReserveRatioOutOfRange", f"q={p.q}"))
    if p.lambda1 > 0 and p.h / p.lambda1 - p.beta <= 0:
        problems.append(("RNonPositive", f"h/lambda1={p.h / p.lambda1} <= beta={p.beta}"))
    return problems


@dataclass(frozen=True)
class ValidatedParams(ModelParams):
    """Parameters that passed validation, with ``r`` and ``c`` attached.

    ``r = h/lambda1 - beta`` is the per-unit gain of a sale and
    ``c = h/lambda1 + n*alpha`` the per-unit price of a purchase.
    Constructing one directly runs the same checks as :func:`validate_params`.
    """

    r: float = field(init=False)
    c: float = field(init=False)

    def __post_init__(self):
        problems = _check(self)
        if problems:
            raise ParameterError([p[0] for p in problems], [p[1] for p in problems])
        object.__setattr__(self, "r", self.h / self.lambda1 - self.beta)
        object.__setattr__(self, "c", self.h / self.lambda1 + self.n * self.alpha)

    def raw(self) -> ModelParams:
        return ModelParams(**{f.name: getattr(self, f.name) for f in fields(ModelParams)})


def validate_params(raw: ModelParams) -> ValidatedParams:
    """Validate ``raw``; raises :class:`ParameterError` listing every failed check."""
    if isinstance(raw, ValidatedParams):
        return raw
    return ValidatedParams(**asdict(raw))


PARAM_KEYS = tuple(f.name for f in fields(ModelParams))


def params_from_mapping(doc: Mapping) -> ValidatedParams:
    """Build validated parameters from a mapping with exactly the model keys.

    ``q`` may be omitted.  Unknown keys raise :class:`ConfigError`.
    """
    if not isinstance(doc, Mapping):
        raise ConfigError("parameter document must be a JSON object")
    unknown = sorted(set(doc) - set(PARAM_KEYS))
    if unknown:
        raise ConfigError(f"unknown parameter keys: {', '.join(unknown)}")
    missing = [k for k in PARAM_KEYS if k != "q" and k not in doc]
    if missing:
        raise ConfigError(f"missing parameter keys: {', '.join(missing)}")
    values = {}
    for k, v in doc.items():
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"parameter {k!r} must be a number, got {v!r}")
        values[k] = float(v)
    return validate_params(ModelParams(**values))


def load_params(path: str | Path) -> ValidatedParams:
    with open(path) as fh:
        return params_from_mapping(json.load(fh))


def excess_from_deposits(deposit: float, q: float) -> float:
    """Excess reserves ``(1 - q) * deposit`` left after required reserves."""
    if deposit < 0:
        raise ValueError(f"deposit must be non-negative, got {deposit}")
    if not 0.0 <= q < 1.0:
        raise ValueError(f"reserve ratio must lie in [0, 1), got {q}")
    return (1.0 - q) * deposit


@dataclass(frozen=True)
class RootSet:
    """Characteristic exponents.

    ``gamma_bar1`` and ``-gamma1`` solve ``sigma^2 s^2/2 + mu s - lambda1 = 0``;
    ``-gamma2`` solves the same quadratic with ``lambda2``, so that
    ``exp(-gamma2 x)`` is an eigenfunction of the generator.
    """

    gamma1: float
    gamma_bar1: float
    gamma2: float


def characteristic_exponents(mu: float, sigma: float, lam: float) -> tuple[float, float]:
    """Return ``(decay, growth)``, both positive, with ``-decay`` and ``growth``
    the two roots of ``sigma^2 s^2/2 + mu s - lam = 0``."""
    s2 = sigma * sigma
    disc = math.sqrt(mu * mu + 2.0 * s2 * lam)
    # the product of the two roots is -2 lam / s2; use it to avoid cancellation
    if mu >= 0:
        decay = (disc + mu) / s2
        growth = 2.0 * lam / (disc + mu)
    else:
        growth = (disc - mu) / s2
        decay = 2.0 * lam / (disc - mu)
    return decay, growth


def compute_roots(params: ValidatedParams) -> RootSet:
    p = validate_params(params)
    gamma1, gamma_bar1 = characteristic_exponents(p.mu, p.sigma, p.lambda1)
    gamma2, _ = characteristic_exponents(p.mu, p.sigma, p.lambda2)
    return RootSet(gamma1=gamma1, gamma_bar1=gamma_bar1, gamma2=gamma2)


def _exp(arg):
    a = np.asarray(arg, dtype=float)
    if a.size and np.nanmax(a) > _EXP_MAX:
        raise DomainOverflow(f"exp argument {float(np.nanmax(a)):.6g} exceeds float64 range")
    out = np.exp(a)
    return float(out) if out.ndim == 0 else out


def g_family(x, decay: float, growth: float, order: int = 0):
    """``decay * exp(growth x) + growth * exp(-decay x)`` or its ``order``-th derivative."""
    up = _exp(np.multiply(growth, x))
    down = _exp(np.multiply(-decay, x))
    if order == 0:
        return decay * up + growth * down
    if order == 1:
        return decay * growth * (up - down)
    if order == 2:
        return decay * growth * (growth * up + decay * down)
    raise ValueError("order must be 0, 1 or 2")


def g(x, roots: RootSet):
    return g_family(x, roots.gamma1, roots.gamma_bar1, 0)


def g_prime(x, roots: RootSet):
    return g_family(x, roots.gamma1, roots.gamma_bar1, 1)


def g_double_prime(x, roots: RootSet):
    return g_family(x, roots.gamma1, roots.gamma_bar1, 2)


def generator(u_prime, u_double_prime, mu: float, sigma: float):
    """Apply ``mu u' + sigma^2 u''/2`` given derivative values."""
    return mu * np.asarray(u_prime) + 0.5 * sigma * sigma * np.asarray(u_double_prime)
