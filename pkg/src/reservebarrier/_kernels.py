"""Compiled inner loops shared by the reflection engine and the Monte Carlo driver."""
import numba as nb
import numpy as np

# column layout of the per-barrier output row written by path_functionals
SALES_L1 = 0        # sum e^{-lambda1 t} dU
PURCHASES_L1 = 1    # sum e^{-lambda1 t} dL
PURCHASES_L2 = 2    # sum e^{-lambda2 t} dL
HOLDING_L1 = 3      # trapezoid of e^{-lambda1 t} Z_t dt
Z_MIN = 4
Z_MAX_EXCESS = 5    # max(Z) - b
N_BASE_COLS = 6


@nb.njit(cache=True)
def build_path(xi, x0, drift_step, vol_step):
    n = xi.shape[0]
    out = np.empty(n + 1)
    x = x0
    out[0] = x
    for k in range(n):
        x = x + (drift_step + vol_step * xi[k])
        out[k + 1] = x
    return out


@nb.njit(cache=True)
def reflect(x, b):
    n = x.shape[0]
    z = np.empty(n)
    l = np.empty(n)
    u = np.empty(n)
    l[0] = 0.0
    if x[0] > b:
        u[0] = x[0] - b
        z[0] = b
    else:
        u[0] = 0.0
        z[0] = x[0]
    for k in range(n - 1):
        zt = x[k + 1] + (l[k] - u[k])
        if zt < 0.0:
            l[k + 1] = l[k] - zt
            u[k + 1] = u[k]
            z[k + 1] = 0.0
        elif zt > b:
            l[k + 1] = l[k]
            u[k + 1] = u[k] + (zt - b)
            z[k + 1] = b
        else:
            l[k + 1] = l[k]
            u[k + 1] = u[k]
            z[k + 1] = zt
    return z, l, u


@nb.njit(cache=True)
def net_transaction_at(x, b, k):
    """L_k - U_k from the double Skorokhod formula, by a suffix-minimum sweep."""
    first = max(x[0] - b, 0.0)
    run_inf = x[k]
    best = min(x[k] - b, run_inf)
    for s in range(k - 1, -1, -1):
        if x[s] < run_inf:
            run_inf = x[s]
        cand = min(x[s] - b, run_inf)
        if cand > best:
            best = cand
    head = min(first, run_inf)
    return -max(head, best)


@nb.njit(cache=True)
def net_transaction_all(x, b, out):
    """Same formula for every index in one pass (running inf / running sup-inf)."""
    head = max(x[0] - b, 0.0)
    best = -np.inf
    for k in range(x.shape[0]):
        xk = x[k]
        if xk < head:
            head = xk
        # sup_s min(x_s - b, inf_[s,k] x) updates as max(min(prev, x_k), x_k - b)
        best = max(min(best, xk), xk - b)
        out[k] = -max(head, best)


@nb.njit(cache=True)
def _one_barrier(xi, x0, drift_step, vol_step, dt, b, lam1, lam2, row):
    n = xi.shape[0]
    lc = 0.0
    uc = 0.0
    sales1 = 0.0
    if x0 > b:
        uc = x0 - b
        z = b
        sales1 = x0 - b
    else:
        z = x0
    z_min = z
    z_max = z
    hold = 0.5 * z
    buys1 = 0.0
    buys2 = 0.0
    q1 = np.exp(-lam1 * dt)
    q2 = np.exp(-lam2 * dt)
    d1 = 1.0
    d2 = 1.0
    x = x0
    for k in range(n):
        x = x + (drift_step + vol_step * xi[k])
        d1 = d1 * q1
        d2 = d2 * q2
        zt = x + (lc - uc)
        if zt < 0.0:
            lc -= zt
            buys1 -= zt * d1
            buys2 -= zt * d2
            z = 0.0
        elif zt > b:
            du = zt - b
            uc += du
            sales1 += du * d1
            z = b
        else:
            z = zt
        if z < z_min:
            z_min = z
        elif z > z_max:
            z_max = z
        hold += z * d1
    hold -= 0.5 * z * d1
    row[SALES_L1] = sales1
    row[PURCHASES_L1] = buys1
    row[PURCHASES_L2] = buys2
    row[HOLDING_L1] = hold * dt
    row[Z_MIN] = z_min
    row[Z_MAX_EXCESS] = z_max - b
    return x


@nb.njit(cache=True)
def _identity_pass(xi, x0, drift_step, vol_step, dt, b, lam):
    """Both sides of int e^{-lam t} L_t dt = (1/lam) int e^{-lam t} dL on one path.

    L is right-continuous, constant on [t_k, t_{k+1}) and frozen after the horizon.
    """
    n = xi.shape[0]
    lc = 0.0
    uc = x0 - b if x0 > b else 0.0
    q = np.exp(-lam * dt)
    d = 1.0
    left = 0.0
    right = 0.0
    x = x0
    for k in range(n):
        x = x + (drift_step + vol_step * xi[k])
        d_next = d * q
        left += lc * (d - d_next)
        d = d_next
        zt = x + (lc - uc)
        if zt < 0.0:
            lc -= zt
            right -= zt * d
        elif zt > b:
            uc += zt - b
    left += lc * d
    return left / lam, right / lam


@nb.njit(cache=True)
def path_functionals(xi, x0, drift_step, vol_step, dt, barriers, lam1, lam2, id_rates, id_mask, out):
    """Simulate one path and accumulate discounted functionals for every barrier.

    All barriers see the same increments (the path is rebuilt per barrier with
    identical arithmetic).  Purchases/sales realized over (t_{k-1}, t_k] carry
    the discount at t_k; the time-0 sale jump carries 1.  For each rate in
    ``id_rates`` two more columns hold the two sides of the integration-by-parts
    identity for L, filled only where ``id_mask`` is set (NaN elsewhere).
    Returns X at the horizon.
    """
    x_end = x0
    for j in range(barriers.shape[0]):
        x_end = _one_barrier(xi, x0, drift_step, vol_step, dt, barriers[j],
                             lam1, lam2, out[j])
        for i in range(id_rates.shape[0]):
            if not id_mask[j]:
                out[j, N_BASE_COLS + 2 * i] = np.nan
                out[j, N_BASE_COLS + 2 * i + 1] = np.nan
                continue
            lhs, rhs = _identity_pass(xi, x0, drift_step, vol_step, dt, barriers[j], id_rates[i])
            out[j, N_BASE_COLS + 2 * i] = lhs
            out[j, N_BASE_COLS + 2 * i + 1] = rhs
    return x_end
