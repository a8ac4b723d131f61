"""Two-sided reflection of sampled paths into the band ``[0, b]``.

``reflect_path`` runs the step recursion: the candidate state is
``x[k+1] + l[k] - u[k]``; below 0 the shortfall is bought (``l``), above ``b`` the
excess is sold (``u``).  With a single increment per step only one side can be
violated, so at most one of the two controls moves.  A path starting above ``b``
sells ``x0 - b`` at time 0.

``net_transaction_closed_form`` evaluates

    L_k - U_k = -max( min((x0 - b)^+, inf_{j<=k} x_j),
                      max_{s<=k} min(x_s - b, inf_{s<=j<=k} x_j) )

over grid indices, independently of the recursion.

For a fixed path, ``l - u`` (equivalently ``z``) is nondecreasing in ``b``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import TextIO

import numpy as np

from . import _kernels
from .errors import IndexOutOfRange, NegativeInitialState


@dataclass(frozen=True)
class DiscretePath:
    dt: float
    values: np.ndarray

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=float)
        if vals.ndim != 1 or vals.size == 0:
            raise ValueError("path needs a non-empty 1-d sequence of values")
        if not np.all(np.isfinite(vals)):
            raise ValueError("path values must be finite")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return self.values.size

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.values.size)


@dataclass(frozen=True)
class ControlledPath:
    dt: float
    x: np.ndarray
    z: np.ndarray
    l: np.ndarray
    u: np.ndarray
    b: float

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.z.size)

    @property
    def net(self) -> np.ndarray:
        return self.l - self.u

    def write_csv(self, fh: TextIO) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "x", "z", "l", "u"])
        for row in zip(self.times, self.x, self.z, self.l, self.u):
            w.writerow([f"{v:.17g}" for v in row])


def _check_start(path: DiscretePath, b: float) -> None:
    if b < 0:
        raise ValueError(f"barrier must be >= 0, got {b}")
    if path.values[0] < 0:
        raise NegativeInitialState(f"X0 = {path.values[0]} < 0")


def reflect_path(path: DiscretePath, b: float) -> ControlledPath:
    _check_start(path, b)
    z, l, u = _kernels.reflect(path.values, float(b))
    return ControlledPath(dt=path.dt, x=path.values, z=z, l=l, u=u, b=float(b))


def net_transaction_closed_form(path: DiscretePath, b: float, k: int) -> float:
    _check_start(path, b)
    if not 0 <= k < len(path):
        raise IndexOutOfRange(f"index {k} outside [0, {len(path)})")
    return float(_kernels.net_transaction_at(path.values, float(b), int(k)))


def net_transaction_series(path: DiscretePath, b: float) -> np.ndarray:
    """Closed-form ``L - U`` at every index in one O(n) pass."""
    _check_start(path, b)
    out = np.empty(len(path))
    _kernels.net_transaction_all(path.values, float(b), out)
    return out


@dataclass
class ComplementarityReport:
    passed: bool
    violations: list[dict] = field(default_factory=list)


def check_complementarity(cp: ControlledPath, tol: float = 1e-12) -> ComplementarityReport:
    """Check that purchases happen only at 0 and sales only at ``b``.

    Also flags steps where both controls move, decreasing controls and states
    outside the band.
    """
    z, l, u, b = cp.z, cp.l, cp.u, cp.b
    dl = np.diff(l, prepend=0.0)
    du = np.diff(u, prepend=0.0)
    violations = []

    def flag(kind, idx, detail):
        for k in np.flatnonzero(idx):
            violations.append({"index": int(k), "kind": kind, "detail": float(detail[k])})

    flag("purchase_off_zero", (dl > 0) & (np.abs(z) > tol), z)
    flag("sale_off_barrier", (du > 0) & (np.abs(z - b) > tol), z - b)
    flag("simultaneous_controls", (dl > 0) & (du > 0), dl * du)
    flag("decreasing_l", dl < 0, dl)
    flag("decreasing_u", du < 0, du)
    flag("below_band", z < -tol, z)
    flag("above_band", z > b + tol, z - b)
    violations.sort(key=lambda v: v["index"])
    return ComplementarityReport(passed=not violations, violations=violations)
