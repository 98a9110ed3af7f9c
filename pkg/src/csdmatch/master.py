"""Fluid task partition: capacity-capped Sinkhorn scaling and its duals.

The partition problem allocates f[od, rs] tasks of pair rs to the driver
group of OD pair od, minimizing sum f * (C - cbar) plus the scaled entropy
(1/theta) * sum f * (log(f / q) - 1), subject to row sums equal to the
group sizes q and column sums at most the task counts n.  Stationarity
gives f = q * K * u * v with kernel K = exp(theta * (cbar - C)), a row
scaling u and a column scaling v in (0, 1]; the capacity price is
lambda = -(1/theta) log v >= 0 and the posted reward is w = cbar - lambda.

Iteration (u then capped v, starting from ones):

    u <- 1 / (K v)
    v <- min( n / (K^T (q u)), 1 )

The column update folds the group sizes q into the transpose product so
that the column sums of f are the controlled quantity.  Both scalings are
also maintained in log space; the log path activates automatically when
theta * |cbar - C| gets large enough to overflow exp, so large theta never
crashes.  After the stopping rule (max relative change of u and v below
tol) the iteration is polished a little further and closed with one final
row update, which makes row sums exact to float precision while leaving
column sums within the polish residual of their caps.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.special import logsumexp

from .errors import ConfigurationError, ConvergenceError, InfeasibleError, ValidationError

# exp arguments beyond this use the log-sum-exp path; chosen well below the
# float64 overflow point so that products of two scaled exponentials stay
# finite on the multiplicative path.
LOG_DOMAIN_THRESHOLD = 350.0

# Residual the post-convergence polish aims for; bounds how far column sums
# can exceed their caps after the final row update.  The polish phase gets
# its own iteration budget on top of max_iter.
POLISH_TOL = 1e-7
POLISH_MAX_ITER = 5_000


@dataclass(frozen=True)
class Kernel:
    """Scaling kernel K = exp(theta * (cbar - C)) with its log kept exact."""

    gain: np.ndarray
    log_K: np.ndarray
    theta: float
    use_log: bool

    @property
    def K(self):
        return np.exp(self.log_K)


@dataclass
class DualPrices:
    """Master-problem prices recovered from the converged scalings."""

    u: np.ndarray
    v: np.ndarray
    rho: np.ndarray
    lam: np.ndarray
    w: np.ndarray


@dataclass
class PartitionResult:
    """Converged continuous partition and solver diagnostics."""

    f: np.ndarray
    u: np.ndarray
    v: np.ndarray
    iterations: int
    polish_iterations: int
    residual: float
    residuals: np.ndarray
    trace: list
    log_domain: bool


def build_kernel(C, cbar, theta):
    """Kernel for the scaling iteration.

    Stores log K = theta * (cbar - C) alongside; flags the log-domain path
    whenever exponentiating would overflow instead of crashing later.
    """
    if theta <= 0:
        raise ConfigurationError("theta must be positive")
    C = np.asarray(C, dtype=np.float64)
    cbar = np.asarray(cbar, dtype=np.float64)
    gain = cbar[None, :] - C
    log_K = theta * gain
    use_log = bool(np.max(np.abs(log_K)) > LOG_DOMAIN_THRESHOLD)
    return Kernel(gain=gain, log_K=log_K, theta=theta, use_log=use_log)


def _rel_change(new, old):
    return float(np.max(np.abs(new / old - 1.0)))


def _rel_change_log(new_log, old_log):
    return float(np.max(np.abs(np.expm1(new_log - old_log))))


@njit(cache=True, nogil=True)
def _iter_mult(K, Kq, n, u, v, u_new, v_new):
    """One u-then-capped-v update; returns the max relative change,
    or -1.0 when the multiplicative path leaves float range."""
    W, T = K.shape
    res = 0.0
    for w in range(W):
        s = 0.0
        for t in range(T):
            s += K[w, t] * v[t]
        un = 1.0 / s
        if not np.isfinite(un):
            return -1.0
        r = abs(un / u[w] - 1.0)
        if r > res:
            res = r
        u_new[w] = un
    for t in range(T):
        s = 0.0
        for w in range(W):
            s += Kq[w, t] * u_new[w]
        vn = n[t] / s
        if vn > 1.0:
            vn = 1.0
        if not np.isfinite(vn):
            return -1.0
        r = abs(vn / v[t] - 1.0)
        if r > res:
            res = r
        v_new[t] = vn
    return res


@njit(cache=True, nogil=True)
def _iter_log(log_K, log_q, log_n, alpha, beta, alpha_new, beta_new):
    """Log-domain twin of _iter_mult (log-sum-exp updates)."""
    W, T = log_K.shape
    res = 0.0
    for w in range(W):
        mx = -np.inf
        for t in range(T):
            x = log_K[w, t] + beta[t]
            if x > mx:
                mx = x
        s = 0.0
        for t in range(T):
            s += np.exp(log_K[w, t] + beta[t] - mx)
        an = -(mx + np.log(s))
        r = abs(np.expm1(an - alpha[w]))
        if r > res:
            res = r
        alpha_new[w] = an
    for t in range(T):
        mx = -np.inf
        for w in range(W):
            x = log_K[w, t] + log_q[w] + alpha_new[w]
            if x > mx:
                mx = x
        s = 0.0
        for w in range(W):
            s += np.exp(log_K[w, t] + log_q[w] + alpha_new[w] - mx)
        bn = log_n[t] - (mx + np.log(s))
        if bn > 0.0:
            bn = 0.0
        r = abs(np.expm1(bn - beta[t]))
        if r > res:
            res = r
        beta_new[t] = bn
    return res


def sinkhorn_solve(kernel, q, n, tol=1e-5, max_iter=10_000, force_log=None):
    """Run the capped scaling iteration until both scalings settle.

    kernel : Kernel from build_kernel
    q : group sizes (row marginals, enforced exactly)
    n : task counts (column caps)
    tol : stopping threshold on the max relative change of u and v
    force_log : override the automatic log-domain choice (tests only)

    Returns a PartitionResult.  Raises InfeasibleError when sum(q) exceeds
    sum(n) and ConvergenceError when max_iter passes without reaching
    tol (the error carries the last residual).
    """
    q = np.asarray(q, dtype=np.float64)
    n = np.asarray(n, dtype=np.float64)
    if q.sum() > n.sum():
        raise InfeasibleError(
            f"driver total {q.sum():g} exceeds task total {n.sum():g}")
    use_log = kernel.use_log if force_log is None else bool(force_log)
    start = time.perf_counter()
    trace = []
    residuals = []
    converged_at = None

    polish_tol = min(tol, POLISH_TOL)
    if not use_log:
        with np.errstate(over="ignore"):
            K = np.exp(kernel.log_K)
        if not np.all(np.isfinite(K)):
            return sinkhorn_solve(kernel, q, n, tol=tol, max_iter=max_iter,
                                  force_log=True)
        K = np.ascontiguousarray(K)
        Kq = np.ascontiguousarray(K * q[:, None])
        u = np.ones(q.shape[0])
        v = np.ones(n.shape[0])
        u_new = np.empty_like(u)
        v_new = np.empty_like(v)
        for m in range(1, max_iter + POLISH_MAX_ITER + 1):
            res = _iter_mult(K, Kq, n, u, v, u_new, v_new)
            if res < 0.0:
                # Mid-solve overflow: redo in log space.
                return sinkhorn_solve(kernel, q, n, tol=tol, max_iter=max_iter,
                                      force_log=True)
            u, u_new = u_new, u
            v, v_new = v_new, v
            residuals.append(res)
            trace.append((m, res, time.perf_counter() - start))
            if converged_at is None and res < tol:
                converged_at = m
            if converged_at is None and m >= max_iter:
                break
            if converged_at is not None and (
                    res < polish_tol or m >= converged_at + POLISH_MAX_ITER):
                break
        if converged_at is None:
            raise ConvergenceError(
                f"no convergence in {max_iter} iterations (residual {residuals[-1]:.3e})",
                iterations=max_iter, residual=residuals[-1])
        u = 1.0 / (K @ v)  # final row rebalance: row sums of f become exact
        f = (q * u)[:, None] * K * v[None, :]
    else:
        log_q = np.ascontiguousarray(np.log(q))
        log_n = np.ascontiguousarray(np.log(n))
        log_K = np.ascontiguousarray(kernel.log_K)
        alpha = np.zeros(q.shape[0])
        beta = np.zeros(n.shape[0])
        alpha_new = np.empty_like(alpha)
        beta_new = np.empty_like(beta)
        for m in range(1, max_iter + POLISH_MAX_ITER + 1):
            res = _iter_log(log_K, log_q, log_n, alpha, beta, alpha_new, beta_new)
            alpha, alpha_new = alpha_new, alpha
            beta, beta_new = beta_new, beta
            residuals.append(res)
            trace.append((m, res, time.perf_counter() - start))
            if converged_at is None and res < tol:
                converged_at = m
            if converged_at is None and m >= max_iter:
                break
            if converged_at is not None and (
                    res < polish_tol or m >= converged_at + POLISH_MAX_ITER):
                break
        if converged_at is None:
            raise ConvergenceError(
                f"no convergence in {max_iter} iterations (residual {residuals[-1]:.3e})",
                iterations=max_iter, residual=residuals[-1])
        alpha = -logsumexp(log_K + beta[None, :], axis=1)
        f = np.exp(log_q[:, None] + alpha[:, None] + log_K + beta[None, :])
        u = np.exp(alpha)
        v = np.exp(beta)

    total = len(residuals)
    return PartitionResult(
        f=f, u=u, v=v,
        iterations=converged_at,
        polish_iterations=total - converged_at,
        residual=residuals[-1],
        residuals=np.array(residuals),
        trace=trace,
        log_domain=use_log,
    )


def write_trace_csv(result, path):
    """Dump the per-iteration (iteration, residual, elapsed) trace."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("iteration,residual,elapsed_s\n")
        for m, res, elapsed in result.trace:
            fh.write(f"{m},{res:.12e},{elapsed:.6f}\n")


def extract_duals(u, v, theta, cbar):
    """Prices from the converged scalings.

    lambda = -(1/theta) log v >= 0 is the capacity price, w = cbar - lambda
    the posted reward, rho = -(1/theta) log u the per-OD surplus (defined
    up to the additive constant set by the noise location convention).
    """
    v = np.asarray(v, dtype=np.float64)
    if np.any(v <= 0.0) or np.any(v > 1.0 + 1e-12):
        raise ValidationError("column scaling v must lie in (0, 1]")
    lam = np.maximum(-np.log(np.minimum(v, 1.0)) / theta, 0.0)
    rho = -np.log(np.asarray(u, dtype=np.float64)) / theta
    w = np.asarray(cbar, dtype=np.float64) - lam
    return DualPrices(u=u, v=v, rho=rho, lam=lam, w=w)


def logit_value_function(f_row, C_row, cbar, theta, q_od):
    """Closed-form fluid estimate of one group's optimal matching surplus.

    z = sum f * (cbar - C) - (1/theta) * sum f * log(f / q); requires an
    interior (strictly positive) allocation row summing to the group size.
    """
    f_row = np.asarray(f_row, dtype=np.float64)
    if np.any(f_row <= 0.0):
        raise ValidationError("value function needs a strictly positive row")
    gain = np.asarray(cbar, dtype=np.float64) - np.asarray(C_row, dtype=np.float64)
    return float(f_row @ gain - (f_row @ np.log(f_row / q_od)) / theta)


def master_objective(f, C, cbar, theta, q):
    """Objective of the fluid partition problem (lower is better)."""
    f = np.asarray(f, dtype=np.float64)
    cost = np.asarray(C, dtype=np.float64) - np.asarray(cbar, dtype=np.float64)[None, :]
    ent = f * (np.log(f / np.asarray(q, dtype=np.float64)[:, None]) - 1.0)
    return float((f * cost).sum() + ent.sum() / theta)


def _entropy_step(x, q, theta):
    # g(x) = x log(x/q) - x with g(0) = 0; returns (g(x+1) - g(x)) / theta
    x = np.asarray(x, dtype=np.float64)
    up = (x + 1.0) * np.log((x + 1.0) / q) - (x + 1.0)
    lo = np.where(x > 0, x * np.log(np.maximum(x, 1e-300) / q) - x, 0.0)
    return (up - lo) / theta


def round_partition(f, q, n, C, cbar, theta):
    """Integers from the continuous partition, rows kept exact.

    Per-row largest-remainder rounding to the group size (ties resolved
    toward the lower task-pair index), then any column exceeding its task
    count is repaired by shifting single units to slack columns, picking
    the move with the smallest exact objective loss each time.
    """
    f = np.asarray(f, dtype=np.float64)
    q = np.asarray(q, dtype=np.int64)
    n = np.asarray(n, dtype=np.int64)
    if int(q.sum()) > int(n.sum()):
        raise InfeasibleError("more drivers than tasks; integer repair impossible")
    W, T = f.shape
    base = np.floor(f).astype(np.int64)
    frac = f - base
    f_int = base.copy()
    for w in range(W):
        missing = int(q[w] - base[w].sum())
        if missing < 0:
            # floor can only undershoot a row summing to q
            raise ValidationError("row sums exceed group sizes")
        if missing:
            order = np.lexsort((np.arange(T), -frac[w]))
            f_int[w, order[:missing]] += 1
    cost = np.asarray(C, dtype=np.float64) - np.asarray(cbar, dtype=np.float64)[None, :]
    qf = q.astype(np.float64)
    col = f_int.sum(axis=0)
    while True:
        over = np.nonzero(col > n)[0]
        if over.size == 0:
            break
        rs_o = int(over[0])
        slack = np.nonzero(col < n)[0]
        rows = np.nonzero(f_int[:, rs_o] >= 1)[0]
        # leaving rs_o recovers its last unit's objective share ...
        out_gain = (cost[rows, rs_o]
                    + _entropy_step(f_int[rows, rs_o] - 1, qf[rows], theta))
        # ... and entering a slack column costs its next unit's share
        enter = (cost[np.ix_(rows, slack)]
                 + _entropy_step(f_int[np.ix_(rows, slack)],
                                 qf[rows][:, None], theta))
        delta = enter - out_gain[:, None]
        flat = int(np.argmin(delta))  # first minimum: lowest row, then column
        w = int(rows[flat // slack.size])
        rs_s = int(slack[flat % slack.size])
        f_int[w, rs_o] -= 1
        f_int[w, rs_s] += 1
        col[rs_o] -= 1
        col[rs_s] += 1
    return f_int
