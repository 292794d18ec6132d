"""Exact solver for the discrete transportation problem.

Successive shortest augmenting paths with Johnson potentials on the dense
bipartite graph. Marginals are taken as non-negative integers so every
augmentation moves at least one unit and termination is guaranteed; real-
valued distributions are handled by integral rescaling (see
:func:`transport_cost`).

The kernel is plain array code, JIT-compiled when numba is importable and
run as-is otherwise; both paths execute identical IEEE arithmetic.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit as _njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    def _njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f

_INF = np.float64(np.inf)


@_njit(cache=True)
def _solve_kernel(cost, supply, demand):  # pragma: no cover - exercised via wrapper
    m, n = cost.shape
    flow = np.zeros((m, n), dtype=np.int64)
    ps = np.zeros(m, dtype=np.float64)  # supply-side potentials
    pd = np.zeros(n, dtype=np.float64)  # demand-side potentials
    s = supply.copy()
    d = demand.copy()
    remaining = np.int64(0)
    for i in range(m):
        remaining += s[i]

    dist_s = np.empty(m, dtype=np.float64)
    dist_d = np.empty(n, dtype=np.float64)
    settled = np.empty(m, dtype=np.bool_)
    parent_s = np.empty(m, dtype=np.int64)  # demand that reached this supply (-1: source)
    parent_d = np.empty(n, dtype=np.int64)  # supply that reached this demand

    while remaining > 0:
        for i in range(m):
            dist_s[i] = 0.0 if s[i] > 0 else _INF
            settled[i] = False
            parent_s[i] = -1
        for j in range(n):
            dist_d[j] = _INF
            parent_d[j] = -1

        # Dijkstra over supply nodes; demand distances are relaxed lazily.
        # Residual arcs with positive flow have zero reduced cost by
        # complementary slackness, so hopping demand -> supply is free.
        # Reduced costs are clamped at zero: float round-off on flow arcs
        # would otherwise allow epsilon-negative arcs that can knit parent
        # pointers into a cycle.
        for _ in range(m):
            u = -1
            best = _INF
            for i in range(m):
                if not settled[i] and dist_s[i] < best:
                    best = dist_s[i]
                    u = i
            if u < 0:
                break
            settled[u] = True
            for j in range(n):
                rc = cost[u, j] + ps[u] - pd[j]
                if rc < 0.0:
                    rc = 0.0
                nd = dist_s[u] + rc
                if nd < dist_d[j]:
                    dist_d[j] = nd
                    parent_d[j] = u
                    for i in range(m):
                        if flow[i, j] > 0 and not settled[i] and nd < dist_s[i]:
                            dist_s[i] = nd
                            parent_s[i] = j

        t = -1
        best = _INF
        for j in range(n):
            if d[j] > 0 and dist_d[j] < best:
                best = dist_d[j]
                t = j
        if t < 0:
            return flow, np.int64(1)  # infeasible: marginals out of balance

        dist_t = dist_d[t]
        for i in range(m):
            if dist_s[i] < dist_t:
                ps[i] += dist_s[i]
            else:
                ps[i] += dist_t
        for j in range(n):
            if dist_d[j] < dist_t:
                pd[j] += dist_d[j]
            else:
                pd[j] += dist_t

        # Walk parents back from t to a source supply to find the bottleneck.
        max_hops = 2 * (m + n) + 4
        delta = d[t]
        j = t
        hops = 0
        while True:
            hops += 1
            if hops > max_hops:
                return flow, np.int64(2)  # parent chain corrupt
            i = parent_d[j]
            if parent_s[i] < 0:
                if s[i] < delta:
                    delta = s[i]
                break
            jj = parent_s[i]
            if flow[i, jj] < delta:
                delta = flow[i, jj]
            j = jj

        j = t
        while True:
            i = parent_d[j]
            flow[i, j] += delta
            if parent_s[i] < 0:
                s[i] -= delta
                break
            jj = parent_s[i]
            flow[i, jj] -= delta
            j = jj
        d[t] -= delta
        remaining -= delta

    return flow, np.int64(0)


def min_cost_transport(cost: np.ndarray, supply: np.ndarray,
                       demand: np.ndarray) -> np.ndarray:
    """Optimal integer flow for given cost matrix and integral marginals.

    ``cost`` is (m, n) with non-negative entries; ``supply``/``demand`` are
    int64 vectors with equal positive totals. Returns the (m, n) int64 flow
    matrix whose row sums equal supply and column sums equal demand at
    minimum total cost.
    """
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    supply = np.ascontiguousarray(supply, dtype=np.int64)
    demand = np.ascontiguousarray(demand, dtype=np.int64)
    if cost.ndim != 2 or cost.shape != (supply.size, demand.size):
        raise ValueError("cost shape must be (len(supply), len(demand))")
    if (supply < 0).any() or (demand < 0).any():
        raise ValueError("marginals must be non-negative")
    if supply.sum() != demand.sum():
        raise ValueError("supply and demand totals differ")
    if supply.sum() == 0:
        return np.zeros(cost.shape, dtype=np.int64)
    if not np.isfinite(cost).all() or (cost < 0).any():
        raise ValueError("cost entries must be finite and non-negative")
    flow, status = _solve_kernel(cost, supply, demand)
    if status == 1:
        raise RuntimeError("transport instance infeasible")
    if status != 0:
        raise RuntimeError("transport solver failed to converge")
    return flow


def transport_cost(cost: np.ndarray, a_counts: np.ndarray,
                   b_counts: np.ndarray) -> float:
    """Exact optimal transport cost between two count-normalized histograms.

    ``a_counts``/``b_counts`` are positive integer multiplicities; each side
    is normalized to total mass one. Counts are cross-scaled (supply by the
    other side's total) so both integral marginals share the same total and
    the unit cost is recovered by dividing out the scale.
    """
    a_counts = np.asarray(a_counts, dtype=np.int64)
    b_counts = np.asarray(b_counts, dtype=np.int64)
    ta = int(a_counts.sum())
    tb = int(b_counts.sum())
    if ta == 0 or tb == 0:
        raise ValueError("both sides need positive total mass")
    flow = min_cost_transport(cost, a_counts * tb, b_counts * ta)
    total = float((flow.astype(np.float64) * cost).sum())
    return total / float(ta * tb)


def relaxed_lower_bound(cost: np.ndarray, a_weights: np.ndarray,
                        b_weights: np.ndarray) -> float:
    """Lower bound on the transport cost: drop one marginal constraint.

    Each unit of mass moves to its nearest counterpart; the larger of the
    two one-sided relaxations is returned.
    """
    cost = np.asarray(cost, dtype=np.float64)
    row = float(np.dot(a_weights, cost.min(axis=1)))
    col = float(np.dot(b_weights, cost.min(axis=0)))
    return max(row, col)
