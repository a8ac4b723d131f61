"""Seeded Monte Carlo estimates of discounted cost/gain functionals under barrier policies.

Random streams
--------------
Path ``i`` draws its standard normals from
``Generator(SFC64(SeedSequence(master_seed, spawn_key=(i,))))``, which is the
child ``i`` that ``SeedSequence(master_seed).spawn`` would produce.  A path's
noise therefore depends only on ``(master_seed, i)``: not on evaluation order,
chunking or worker count.  Every barrier evaluated in one run reuses the same
increments (common random numbers).

Truncation
----------
Infinite-horizon integrals stop at ``T``, the first grid time with
``exp(-lambda2 T) < tail_epsilon`` unless ``horizon_override`` is given.

Reductions
----------
Means and standard errors use :func:`math.fsum`, which is correctly rounded, so
the result is independent of the order in which per-path values arrive.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import _kernels
from .barrier_solver import solve_barrier
from .errors import NegativeInitialState, SpecialCaseViolation, DecreasingCumulative
from .model_core import ValidatedParams, validate_params
from .skorokhod_engine import DiscretePath

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class McConfig:
    n_paths: int
    dt: float = 1e-3
    tail_epsilon: float = 1e-6
    master_seed: int = 0
    horizon_override: float | None = None
    workers: int = 1

    def __post_init__(self):
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not 0.0 < self.tail_epsilon < 1.0:
            raise ValueError("tail_epsilon must lie in (0, 1)")
        if self.horizon_override is not None and not self.horizon_override > 0:
            raise ValueError("horizon_override must be positive")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def n_steps(self, params: ValidatedParams) -> int:
        if self.horizon_override is not None:
            return max(1, math.ceil(self.horizon_override / self.dt - 1e-9))
        slowest = min(params.lambda1, params.lambda2)
        t_min = -math.log(self.tail_epsilon) / slowest
        return math.floor(t_min / self.dt) + 1

    def horizon(self, params: ValidatedParams) -> float:
        return self.n_steps(params) * self.dt


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    n_paths: int
    horizon: float
    dt: float
    master_seed: int


@dataclass(frozen=True)
class PairedEstimate:
    """Two estimates from common paths plus the estimate of their per-path difference."""

    lhs: McEstimate
    rhs: McEstimate
    difference: McEstimate


def path_rng(master_seed: int, path_index: int) -> np.random.Generator:
    seq = np.random.SeedSequence(master_seed, spawn_key=(path_index,))
    return np.random.Generator(np.random.SFC64(seq))


def _normals(master_seed: int, path_index: int, n_steps: int) -> np.ndarray:
    return path_rng(master_seed, path_index).standard_normal(n_steps)


def generate_path(params: ValidatedParams, cfg: McConfig, path_index: int,
                  x0: float) -> DiscretePath:
    """Euler path ``X_{k+1} = X_k + mu dt + sigma sqrt(dt) xi_k`` for stream ``path_index``."""
    p = validate_params(params)
    xi = _normals(cfg.master_seed, path_index, cfg.n_steps(p))
    values = _kernels.build_path(xi, float(x0), p.mu * cfg.dt, p.sigma * math.sqrt(cfg.dt))
    return DiscretePath(dt=cfg.dt, values=values)


def discounted_stieltjes(cumulative: Sequence[float], dt: float, lam: float) -> float:
    """``sum_k exp(-lam t_k) (C_k - C_{k-1})`` with ``C_{-1} = 0``.

    The first entry is a time-0 jump and gets weight 1; an increment realized
    over ``(t_{k-1}, t_k]`` takes the discount at ``t_k``.
    """
    c = np.asarray(cumulative, dtype=float)
    inc = np.diff(c, prepend=0.0)
    if np.any(inc < 0):
        k = int(np.flatnonzero(inc < 0)[0])
        raise DecreasingCumulative(f"negative increment {inc[k]:.3g} at index {k}")
    weights = np.exp(-lam * dt * np.arange(c.size))
    return math.fsum(inc * weights)


# ---------------------------------------------------------------------------
# simulation engine
# ---------------------------------------------------------------------------

@dataclass
class PathFunctionals:
    """Per-path discounted functionals, ``samples[path, barrier, column]``.

    Column layout follows ``_kernels``; identity columns come in pairs per rate
    in ``identity_rates``.
    """

    params: ValidatedParams
    cfg: McConfig
    x0: float
    barriers: np.ndarray
    identity_rates: np.ndarray
    samples: np.ndarray
    x_terminal: np.ndarray
    n_steps: int = field(default=0)

    @property
    def horizon(self) -> float:
        return self.n_steps * self.cfg.dt

    def column(self, barrier_index: int, col: int) -> np.ndarray:
        return self.samples[:, barrier_index, col]

    def gain(self, barrier_index: int = 0) -> np.ndarray:
        p = self.params
        s = self.samples[:, barrier_index]
        return (p.r * s[:, _kernels.SALES_L1] - p.c * s[:, _kernels.PURCHASES_L1]
                - (1.0 - p.n) * p.alpha * s[:, _kernels.PURCHASES_L2])

    def cost(self, barrier_index: int = 0) -> np.ndarray:
        p = self.params
        s = self.samples[:, barrier_index]
        return (p.h * s[:, _kernels.HOLDING_L1] + p.beta * s[:, _kernels.SALES_L1]
                + p.alpha * (p.n * s[:, _kernels.PURCHASES_L1]
                             + (1.0 - p.n) * s[:, _kernels.PURCHASES_L2]))

    def identity_pair(self, barrier_index: int, rate: float) -> tuple[np.ndarray, np.ndarray]:
        """Per-path ``(int e^{-rate t} L dt, (1/rate) int e^{-rate t} dL)``."""
        hits = np.flatnonzero(self.identity_rates == rate)
        if hits.size == 0:
            raise KeyError(f"rate {rate} was not simulated")
        col = _kernels.N_BASE_COLS + 2 * int(hits[0])
        s = self.samples[:, barrier_index]
        return s[:, col], s[:, col + 1]

    def summarize(self, values: np.ndarray) -> McEstimate:
        return summarize(values, self.cfg, self.horizon)


def summarize(values: np.ndarray, cfg: McConfig, horizon: float) -> McEstimate:
    vals = np.asarray(values, dtype=float)
    n = vals.size
    mean = math.fsum(vals) / n
    if n > 1:
        var = math.fsum((vals - mean) ** 2) / (n - 1)
        se = math.sqrt(var / n)
    else:
        se = 0.0
    return McEstimate(mean=mean, std_error=se, n_paths=n, horizon=horizon,
                      dt=cfg.dt, master_seed=cfg.master_seed)


def _run_chunk(args):
    (params, cfg, x0, barriers, rates, id_mask, start, stop, n_steps) = args
    p = params
    m = barriers.size
    samples = np.empty((stop - start, m, _kernels.N_BASE_COLS + 2 * rates.size))
    x_t = np.empty(stop - start)
    drift_step = p.mu * cfg.dt
    vol_step = p.sigma * math.sqrt(cfg.dt)
    report_every = max(1, (stop - start) // 20)
    for i in range(start, stop):
        xi = _normals(cfg.master_seed, i, n_steps)
        x_t[i - start] = _kernels.path_functionals(
            xi, x0, drift_step, vol_step, cfg.dt, barriers,
            p.lambda1, p.lambda2, rates, id_mask, samples[i - start])
        if (i - start + 1) % report_every == 0:
            log.debug("paths %d..%d: %d done", start, stop, i - start + 1)
    return start, samples, x_t


def simulate_functionals(params: ValidatedParams, barriers: Sequence[float], x0: float,
                         cfg: McConfig, identity_rates: Sequence[float] = (),
                         identity_barriers: Sequence[int] | None = None) -> PathFunctionals:
    """Simulate ``cfg.n_paths`` paths and record functionals for every barrier.

    Identity columns (see :meth:`PathFunctionals.identity_pair`) are computed for
    the barrier indices in ``identity_barriers``, default all.

    Work is split into contiguous chunks of path indices; with ``cfg.workers > 1``
    chunks run in separate processes.  Output is identical either way.
    """
    p = validate_params(params)
    if x0 < 0:
        raise NegativeInitialState(f"x0 = {x0} < 0")
    bars = np.ascontiguousarray(barriers, dtype=float)
    if bars.ndim != 1 or bars.size == 0 or np.any(bars < 0):
        raise ValueError("barriers must be a non-empty list of non-negative values")
    rates = np.ascontiguousarray(identity_rates, dtype=float)
    if np.any(rates <= 0):
        raise ValueError("identity rates must be positive")
    id_mask = np.ones(bars.size, dtype=np.bool_)
    if identity_barriers is not None:
        id_mask[:] = False
        id_mask[list(identity_barriers)] = True
    n_steps = cfg.n_steps(p)
    n = cfg.n_paths
    n_chunks = 1 if cfg.workers == 1 else min(n, 4 * cfg.workers)
    edges = np.linspace(0, n, n_chunks + 1).astype(int)
    jobs = [(p, cfg, float(x0), bars, rates, id_mask, int(a), int(b), n_steps)
            for a, b in zip(edges[:-1], edges[1:]) if b > a]
    log.info("simulating %d paths x %d steps, %d barrier(s)", n, n_steps, bars.size)

    samples = np.empty((n, bars.size, _kernels.N_BASE_COLS + 2 * rates.size))
    x_t = np.empty(n)
    if cfg.workers == 1:
        results = map(_run_chunk, jobs)
    else:
        pool = ProcessPoolExecutor(max_workers=cfg.workers)
        results = pool.map(_run_chunk, jobs)
    try:
        for start, chunk, xt in results:
            samples[start:start + chunk.shape[0]] = chunk
            x_t[start:start + chunk.shape[0]] = xt
    finally:
        if cfg.workers > 1:
            pool.shutdown()

    if np.any(samples[:, :, _kernels.Z_MIN] < 0) or np.any(samples[:, :, _kernels.Z_MAX_EXCESS] > 0):
        raise AssertionError("reflected path left the band [0, b]")
    return PathFunctionals(params=p, cfg=cfg, x0=float(x0), barriers=bars,
                           identity_rates=rates, samples=samples, x_terminal=x_t,
                           n_steps=n_steps)


# ---------------------------------------------------------------------------
# estimators
# ---------------------------------------------------------------------------

def estimate_gain(params: ValidatedParams, b: float, x0: float, cfg: McConfig) -> McEstimate:
    fun = simulate_functionals(params, [b], x0, cfg)
    return fun.summarize(fun.gain(0))


def estimate_cost(params: ValidatedParams, b: float, x0: float, cfg: McConfig) -> McEstimate:
    fun = simulate_functionals(params, [b], x0, cfg)
    return fun.summarize(fun.cost(0))


def cost_gain_constant(params: ValidatedParams, x0: float) -> float:
    """``h x0/lambda1 + h mu/lambda1^2``, the sum of cost and gain for any feasible policy."""
    p = params
    return p.h * x0 / p.lambda1 + p.h * p.mu / p.lambda1 ** 2


def cost_gain_identity(fun: PathFunctionals, barrier_index: int = 0) -> PairedEstimate:
    """Cost and gain on common paths; ``difference`` estimates cost + gain - constant."""
    k = fun.cost(barrier_index)
    v = fun.gain(barrier_index)
    resid = k + v - cost_gain_constant(fun.params, fun.x0)
    return PairedEstimate(fun.summarize(k), fun.summarize(v), fun.summarize(resid))


def estimate_cost_gain_identity(params: ValidatedParams, b: float, x0: float,
                                cfg: McConfig) -> PairedEstimate:
    return cost_gain_identity(simulate_functionals(params, [b], x0, cfg))


def transaction_identity(fun: PathFunctionals, barrier_index: int, lam: float) -> PairedEstimate:
    lhs, rhs = fun.identity_pair(barrier_index, lam)
    return PairedEstimate(fun.summarize(lhs), fun.summarize(rhs), fun.summarize(lhs - rhs))


def estimate_transaction_identity(params: ValidatedParams, b: float, x0: float,
                                  cfg: McConfig, lam: float) -> PairedEstimate:
    """Both sides of ``E int e^{-lam t} L_t dt = (1/lam) E int e^{-lam t} dL``."""
    fun = simulate_functionals(params, [b], x0, cfg, identity_rates=[lam])
    return transaction_identity(fun, 0, lam)


@dataclass
class GridResult:
    candidates: np.ndarray
    costs: list[McEstimate]
    argmin: int
    b_star: float
    b_star_adjacent: bool

    @property
    def best(self) -> float:
        return float(self.candidates[self.argmin])


def grid_from_functionals(fun: PathFunctionals, b_star: float) -> GridResult:
    costs = [fun.summarize(fun.cost(j)) for j in range(fun.barriers.size)]
    means = np.array([c.mean for c in costs])
    best = int(np.argmin(means))
    cand = fun.barriers
    lo = cand[max(best - 1, 0)]
    hi = cand[min(best + 1, cand.size - 1)]
    adjacent = bool(lo <= b_star <= hi)
    return GridResult(candidates=cand.copy(), costs=costs, argmin=best,
                      b_star=b_star, b_star_adjacent=adjacent)


def barrier_grid_search(params: ValidatedParams, x0: float, candidates: Sequence[float],
                        cfg: McConfig) -> GridResult:
    """Estimate the cost of each candidate barrier on common random numbers.

    ``b_star_adjacent`` tells whether the analytic barrier lies within one grid
    cell of the empirical argmin.
    """
    cand = np.asarray(candidates, dtype=float)
    if cand.size == 0 or np.any(cand <= 0) or np.any(np.diff(cand) < 0):
        raise ValueError("candidates must be positive and sorted")
    p = validate_params(params)
    b_star = solve_barrier(p).b
    return grid_from_functionals(simulate_functionals(p, cand, x0, cfg), b_star)


@dataclass
class ScalingResult:
    asset_sizes: np.ndarray
    barriers: np.ndarray
    ratios: np.ndarray
    spread: float
    passed: bool


def scaling_experiment(base_params: ValidatedParams, k1: float, k2: float,
                       asset_sizes: Sequence[float], tol: float = 1e-9) -> ScalingResult:
    """Solve the barrier with ``mu = k1 A`` and ``sigma = k2 A`` for each asset size ``A``.

    Passes when the relative spread of ``b(A)/A`` is at most ``tol``.
    """
    p = validate_params(base_params)
    if p.n != 1.0:
        raise SpecialCaseViolation(f"scaling holds for n = 1 only, got n = {p.n}")
    if not k2 > 0:
        raise ValueError("k2 must be positive")
    sizes = np.asarray(asset_sizes, dtype=float)
    if sizes.size == 0 or np.any(sizes <= 0):
        raise ValueError("asset sizes must be positive")
    bs = np.array([solve_barrier(replace(p.raw(), mu=k1 * a, sigma=k2 * a)).b for a in sizes])
    ratios = bs / sizes
    mid = float(np.mean(ratios))
    spread = float((ratios.max() - ratios.min()) / abs(mid)) if mid != 0 else 0.0
    return ScalingResult(asset_sizes=sizes, barriers=bs, ratios=ratios,
                         spread=spread, passed=spread <= tol)
