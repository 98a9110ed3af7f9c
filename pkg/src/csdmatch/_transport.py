"""Exact solver for unit-supply transportation problems with few columns.

The problems solved here all share one shape: every driver (row) must be
placed on exactly one task column, column ``j`` holds at most ``cap[j]``
drivers, and the total placement cost is minimized.  Rows number in the
tens of thousands while columns stay around a hundred, so the solver runs
successive shortest paths on a column-compressed residual graph: the only
graph nodes are the columns, and the arc ``j -> j2`` carries the cheapest
cost of relocating one currently placed driver from ``j`` to ``j2``.  Those
relocation minima are kept exact under insertions and removals with a
best/second-best table per ordered column pair.

Costs are fixed-point ``int64`` at 1e-9 resolution, which makes optima and
node potentials exact integers: optimal objective values can be compared
for strict equality, and the potentials certify optimality (they are the
LP duals up to sign).

`removal_improvements` answers, for every placed driver, how much the
objective would recover if that driver vanished and its slot were backfilled
by relocations into the freed capacity (the freed slot ends up covered by a
zero-cost outside unit).  Starting from the optimal base flow this needs a
single shortest-path repair per driver, no re-solve.
"""
from __future__ import annotations

import numpy as np
from numba import njit

from .errors import InfeasibleError, ValidationError

INF = np.int64(2**62)

# Fixed-point grid for float costs: 1e-9 money-minute resolution.
SCALE = 1_000_000_000


def scale_costs(values):
    """Round float costs onto the fixed-point int64 grid."""
    arr = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValidationError("costs must be finite")
    out = np.rint(arr * SCALE)
    if np.any(np.abs(out) > 2.0**52):
        raise ValidationError("costs too large for the 1e-9 fixed-point grid")
    return out.astype(np.int64)


def unscale(value):
    """Map a fixed-point int64 (or array) back to float."""
    return np.asarray(value, dtype=np.float64) / SCALE if np.ndim(value) else float(value) / SCALE


@njit(cache=True, nogil=True)
def _pool_insert(b, j, cost, pool_flat, pool_start, pool_len, pool_pos,
                 val1, arg1, val2, arg2):
    idx = pool_start[j] + pool_len[j]
    pool_flat[idx] = b
    pool_pos[b] = idx
    pool_len[j] += 1
    nt = val1.shape[0]
    base = cost[b, j]
    for j2 in range(nt):
        if j2 == j:
            continue
        d = cost[b, j2] - base
        if d < val1[j, j2] or (d == val1[j, j2] and b < arg1[j, j2]):
            val2[j, j2] = val1[j, j2]
            arg2[j, j2] = arg1[j, j2]
            val1[j, j2] = d
            arg1[j, j2] = b
        elif d < val2[j, j2] or (d == val2[j, j2] and b < arg2[j, j2]):
            val2[j, j2] = d
            arg2[j, j2] = b


@njit(cache=True, nogil=True)
def _pool_remove(b, j, cost, pool_flat, pool_start, pool_len, pool_pos,
                 val1, arg1, val2, arg2):
    idx = pool_pos[b]
    last = pool_start[j] + pool_len[j] - 1
    moved = pool_flat[last]
    pool_flat[idx] = moved
    pool_pos[moved] = idx
    pool_len[j] -= 1
    pool_pos[b] = -1
    nt = val1.shape[0]
    s = pool_start[j]
    npool = pool_len[j]
    for j2 in range(nt):
        if j2 == j:
            continue
        if arg1[j, j2] != b and arg2[j, j2] != b:
            continue
        # b held a top-2 slot for (j, j2): rebuild exactly from the pool.
        v1 = INF
        a1 = np.int64(-1)
        v2 = INF
        a2 = np.int64(-1)
        for k in range(npool):
            bb = pool_flat[s + k]
            d = cost[bb, j2] - cost[bb, j]
            if d < v1 or (d == v1 and bb < a1):
                v2 = v1
                a2 = a1
                v1 = d
                a1 = bb
            elif d < v2 or (d == v2 and bb < a2):
                v2 = d
                a2 = bb
        val1[j, j2] = v1
        arg1[j, j2] = a1
        val2[j, j2] = v2
        arg2[j, j2] = a2


@njit(cache=True, nogil=True)
def _dijkstra(offers, exclude, extra_slack, cap, pool_len, pi,
              val1, arg1, val2, arg2, dist, done, parent_col, parent_drv):
    """Shortest path from a fresh unit to any column with free capacity.

    ``offers[j]`` is the true cost of the unit occupying a slot at column j;
    working distances are reduced by the potentials ``pi`` (the sink
    potential is pinned at 0).  ``exclude`` removes one driver from the
    relocation arcs, ``extra_slack`` grants one hypothetical free slot to a
    column (both -1 to disable).  Returns (reduced distance to the sink,
    exit column); exit column -1 means no free capacity is reachable.
    """
    nt = offers.shape[0]
    for j in range(nt):
        dist[j] = offers[j] - pi[j]
        done[j] = False
        parent_col[j] = -1
        parent_drv[j] = -1
    dist_sink = INF
    exit_col = -1
    while True:
        best = INF
        bj = -1
        for j in range(nt):
            if not done[j] and dist[j] < best:
                best = dist[j]
                bj = j
        if bj == -1 or best >= dist_sink:
            break
        done[bj] = True
        if pool_len[bj] < cap[bj] or bj == extra_slack:
            cand = dist[bj] + pi[bj]
            if cand < dist_sink or (cand == dist_sink and bj < exit_col):
                dist_sink = cand
                exit_col = bj
            if bj == extra_slack:
                # Hypothetical slack is the unique exit of repair searches
                # and its arc may have negative reduced cost, so the usual
                # bound does not tighten any further: stop at settlement.
                break
        for j2 in range(nt):
            if done[j2] or j2 == bj:
                continue
            v = val1[bj, j2]
            b = arg1[bj, j2]
            if b == exclude:
                v = val2[bj, j2]
                b = arg2[bj, j2]
            if b < 0:
                continue
            nd = dist[bj] + v + pi[bj] - pi[j2]
            if nd < dist[j2]:
                dist[j2] = nd
                parent_col[j2] = bj
                parent_drv[j2] = b
    return dist_sink, exit_col


@njit(cache=True, nogil=True)
def _solve_kernel(cost, cap, assign, pi, pool_flat, pool_start, pool_len,
                  pool_pos, val1, arg1, val2, arg2):
    nd, nt = cost.shape
    dist = np.empty(nt, dtype=np.int64)
    done = np.empty(nt, dtype=np.bool_)
    parent_col = np.empty(nt, dtype=np.int64)
    parent_drv = np.empty(nt, dtype=np.int64)
    path_cols = np.empty(nt, dtype=np.int64)
    path_drvs = np.empty(nt, dtype=np.int64)
    for a in range(nd):
        dist_sink, exit_col = _dijkstra(
            cost[a], np.int64(-1), np.int64(-1), cap, pool_len, pi,
            val1, arg1, val2, arg2, dist, done, parent_col, parent_drv)
        if exit_col == -1:
            return np.int64(a)
        # Pin settled columns so reduced costs stay nonnegative and every
        # arc on the shortest path becomes tight.
        for j in range(nt):
            if done[j] and dist[j] < dist_sink:
                pi[j] += dist[j] - dist_sink
        # Path reconstruction: entering driver takes the head column, each
        # parent edge relocates one placed driver toward the exit column.
        k = 0
        j = exit_col
        while j != -1:
            path_cols[k] = j
            path_drvs[k] = parent_drv[j]
            k += 1
            j = parent_col[j]
        # Relocate from the exit backwards so a free pool slot always exists.
        for i in range(k - 1):
            mover = path_drvs[i]
            from_col = path_cols[i + 1]
            to_col = path_cols[i]
            _pool_remove(mover, from_col, cost, pool_flat, pool_start,
                         pool_len, pool_pos, val1, arg1, val2, arg2)
            _pool_insert(mover, to_col, cost, pool_flat, pool_start,
                         pool_len, pool_pos, val1, arg1, val2, arg2)
            assign[mover] = to_col
        head = path_cols[k - 1]
        _pool_insert(a, head, cost, pool_flat, pool_start, pool_len,
                     pool_pos, val1, arg1, val2, arg2)
        assign[a] = head
    return np.int64(-1)


@njit(cache=True, nogil=True)
def _removal_kernel(cost, cap, assign, pi, pool_len, val1, arg1, val2, arg2):
    nd, nt = cost.shape
    out = np.empty(nd, dtype=np.int64)
    dist = np.empty(nt, dtype=np.int64)
    done = np.empty(nt, dtype=np.bool_)
    parent_col = np.empty(nt, dtype=np.int64)
    parent_drv = np.empty(nt, dtype=np.int64)
    offers = np.zeros(nt, dtype=np.int64)
    for x in range(nd):
        jx = assign[x]
        dist_sink, exit_col = _dijkstra(
            offers, np.int64(x), jx, cap, pool_len, pi,
            val1, arg1, val2, arg2, dist, done, parent_col, parent_drv)
        # dist_sink is the true cost of backfilling x's slot with a
        # zero-cost unit (offers carry no potential shift at the source,
        # and the exit adds pi back), so the recovery is its negation.
        out[x] = -dist_sink
    return out


class TransportSolution:
    """Optimal placement plus the state needed for repair queries."""

    def __init__(self, cost, cap, assign, pi, pools):
        self.cost = cost
        self.cap = cap
        self.assign = assign
        self.pi = pi
        self._pools = pools
        idx = np.arange(cost.shape[0])
        self.objective_scaled = int(cost[idx, assign].sum())
        self.counts = np.bincount(assign, minlength=cost.shape[1]).astype(np.int64)

    @property
    def objective(self):
        return self.objective_scaled / SCALE

    def column_prices(self):
        """Nonnegative capacity prices (scaled ints), zero on slack columns."""
        lam = np.maximum(-self.pi, 0)
        return lam

    def removal_improvements(self):
        """Scaled objective recovery from deleting each driver in turn."""
        pool_flat, pool_start, pool_len, pool_pos, val1, arg1, val2, arg2 = self._pools
        return _removal_kernel(self.cost, self.cap, self.assign, self.pi,
                               pool_len, val1, arg1, val2, arg2)


def solve_transport(cost_scaled, cap):
    """Minimize total cost of placing every row on a column.

    cost_scaled : int64 array (rows, columns), fixed-point costs
    cap : int array (columns,), column capacities

    Returns a TransportSolution.  Raises InfeasibleError when capacities
    cannot host all rows.
    """
    cost = np.ascontiguousarray(cost_scaled, dtype=np.int64)
    cap = np.ascontiguousarray(cap, dtype=np.int64)
    nd, nt = cost.shape
    if cap.shape[0] != nt:
        raise ValidationError("capacity vector does not match cost columns")
    if np.any(cap < 0):
        raise ValidationError("negative column capacity")
    if int(cap.sum()) < nd:
        raise InfeasibleError(
            f"total capacity {int(cap.sum())} cannot host {nd} drivers")
    assign = np.full(nd, -1, dtype=np.int64)
    pi = np.zeros(nt, dtype=np.int64)
    pool_start = np.zeros(nt + 1, dtype=np.int64)
    np.cumsum(cap, out=pool_start[1:])
    pool_flat = np.full(int(pool_start[-1]), -1, dtype=np.int64)
    pool_len = np.zeros(nt, dtype=np.int64)
    pool_pos = np.full(nd, -1, dtype=np.int64)
    val1 = np.full((nt, nt), INF, dtype=np.int64)
    arg1 = np.full((nt, nt), -1, dtype=np.int64)
    val2 = np.full((nt, nt), INF, dtype=np.int64)
    arg2 = np.full((nt, nt), -1, dtype=np.int64)
    fail = _solve_kernel(cost, cap, assign, pi, pool_flat, pool_start[:-1],
                         pool_len, pool_pos, val1, arg1, val2, arg2)
    if fail >= 0:
        raise InfeasibleError(f"no free column reachable for driver {int(fail)}")
    pools = (pool_flat, pool_start[:-1], pool_len, pool_pos, val1, arg1, val2, arg2)
    return TransportSolution(cost, cap, assign, pi, pools)
