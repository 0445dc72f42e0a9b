"""Exact max-cost max-flow on the bipartite assignment network.

Topology is fixed: source -> paper -> reviewer -> sink. Each paper-reviewer
pair carries a bundle of unit-capacity parallel arcs whose (integer) costs are
nonincreasing. Bundles are stored run-length compressed as
``(cost, multiplicity)`` runs, so a pair with ``K`` equal-cost arcs is a single
run. Because costs within a bundle are nonincreasing, the arcs carrying flow
always form a prefix of the bundle; only the first unused run (forward) and
the last used run (backward) are ever examined.
"""

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import CapTooSmall
from .rational import as_cap

@dataclass
class FlowNetwork:
    supply: np.ndarray    # (n_p,) capacity of source -> paper
    capacity: np.ndarray  # (n_r,) capacity of reviewer -> sink
    run_cost: np.ndarray  # (n_p, n_r, J) cost of each run (max-cost orientation)
    run_end: np.ndarray   # (n_p, n_r, J) cumulative arc count at end of each run
    n_runs: np.ndarray    # (n_p, n_r) number of runs actually used by each pair

    @property
    def n_p(self):
        return self.supply.shape[0]

    @property
    def n_r(self):
        return self.capacity.shape[0]

    def arc_count(self, p, r):
        k = self.n_runs[p, r]
        return int(self.run_end[p, r, k - 1]) if k else 0

    def pair_arcs(self, p, r):
        """Expanded list of arc costs for one pair, in bundle order."""
        out = []
        start = 0
        for j in range(self.n_runs[p, r]):
            end = int(self.run_end[p, r, j])
            out.extend([int(self.run_cost[p, r, j])] * (end - start))
            start = end
        return out

    def check(self):
        assert np.all(self.supply >= 0) and np.all(self.capacity >= 0)
        for p in range(self.n_p):
            for r in range(self.n_r):
                k = self.n_runs[p, r]
                c = self.run_cost[p, r, :k]
                assert np.all(np.diff(c) <= 0), "bundle costs must be nonincreasing"
                assert np.all(np.diff(self.run_end[p, r, :k]) > 0)


@dataclass
class FlowResult:
    units: np.ndarray  # (n_p, n_r) flow on each pair bundle
    value: int
    cost: int          # exact integer total, fixed-point units
    augmentations: int

    @property
    def paper_flow(self):
        return self.units.sum(axis=1)

    @property
    def reviewer_flow(self):
        return self.units.sum(axis=0)


def _compress(costs):
    """Turn an (n_p, n_r, K) array of arc costs into run arrays."""
    n_p, n_r, K = costs.shape
    if K == 0:
        z = np.zeros((n_p, n_r, 1), dtype=np.int64)
        return z, z.copy(), np.zeros((n_p, n_r), dtype=np.int64)
    if np.all(costs == costs[:, :, :1]):
        run_cost = costs[:, :, :1].copy()
        run_end = np.full((n_p, n_r, 1), K, dtype=np.int64)
        return run_cost, run_end, np.ones((n_p, n_r), dtype=np.int64)
    run_end = np.broadcast_to(np.arange(1, K + 1, dtype=np.int64), costs.shape).copy()
    return costs.astype(np.int64), run_end, np.full((n_p, n_r), K, dtype=np.int64)


def build_transport_network(supply, capacity, pair_caps, pair_costs=None):
    """Network whose pair (p, r) has ``pair_caps[p, r]`` arcs of one shared cost."""
    supply = np.asarray(supply, dtype=np.int64)
    capacity = np.asarray(capacity, dtype=np.int64)
    caps = np.asarray(pair_caps, dtype=np.int64)
    n_p, n_r = caps.shape
    if pair_costs is None:
        pair_costs = np.zeros((n_p, n_r), dtype=np.int64)
    run_cost = np.asarray(pair_costs, dtype=np.int64).reshape(n_p, n_r, 1)
    run_end = caps.reshape(n_p, n_r, 1).copy()
    n_runs = (caps > 0).astype(np.int64)
    return FlowNetwork(supply, capacity, run_cost, run_end, n_runs)


def build_pm_network(inst, Q, f, w):
    """Piecewise-linear flow network for the perturbed objective at precision w.

    Source arcs carry l_p*w, sink arcs l_r*w, and each pair gets floor(Q*w)
    unit arcs, the i-th costing fixpoint(S_pr * [f(i/w) - f((i-1)/w)]).
    """
    from .perturbation import make_perturbation

    Q = as_cap(Q)
    w = int(w)
    if w < 1:
        raise CapTooSmall(f"precision w must be >= 1, got {w}")
    K = (Q * w).numerator // (Q * w).denominator
    if K == 0:
        raise CapTooSmall(f"floor(Q*w) = 0 for Q={Q}, w={w}; increase w")
    f = make_perturbation(f)
    costs = f.arc_costs(inst.S, w, K)
    run_cost, run_end, n_runs = _compress(costs)
    n_p, n_r = inst.S.shape
    return FlowNetwork(
        np.full(n_p, inst.l_p * w, dtype=np.int64),
        np.full(n_r, inst.l_r * w, dtype=np.int64),
        run_cost,
        run_end,
        n_runs,
    )


def linear_network(inst, weights, Q, scale=None):
    """Network for maximizing sum(weights * x) over the capped polytope.

    Q = a/b is handled exactly by working in units of 1/b. Float weights are
    converted to integers with a scale chosen to keep path sums in int64.
    """
    Q = as_cap(Q)
    a, b = Q.numerator, Q.denominator
    weights = np.asarray(weights, dtype=float)
    n_p, n_r = weights.shape
    if scale is None:
        top = float(np.max(np.abs(weights))) if weights.size else 0.0
        scale = 2.0**52 / ((n_p + n_r + 2) * max(top, 1e-300)) if top > 0 else 1.0
        scale = min(scale, 2.0**52)
    costs = np.rint(weights * scale).astype(np.int64)
    net = build_transport_network(
        np.full(n_p, inst.l_p * b), np.full(n_r, inst.l_r * b), np.full((n_p, n_r), a), costs
    )
    return net, b


@njit(cache=True)
def _run_start(run_end, p, r, j):
    return run_end[p, r, j - 1] if j > 0 else 0


@njit(cache=True)
def _ssp(supply, capacity, run_cost, run_end, n_runs, check_reduced):
    n_p = supply.shape[0]
    n_r = capacity.shape[0]
    V = n_p + n_r + 2
    T = V - 1
    R0 = 1 + n_p
    INF = np.int64(2**62)
    units = np.zeros((n_p, n_r), dtype=np.int64)
    jf = np.zeros((n_p, n_r), dtype=np.int64)
    fs = np.zeros(n_p, dtype=np.int64)
    ft = np.zeros(n_r, dtype=np.int64)

    # the residual graph starts acyclic (s -> P -> R -> t), so one pass in
    # topological order is a complete Bellman-Ford
    pi = np.zeros(V, dtype=np.int64)
    have_t = False
    for r in range(n_r):
        best = INF
        for p in range(n_p):
            if supply[p] > 0 and n_runs[p, r] > 0 and -run_cost[p, r, 0] < best:
                best = -run_cost[p, r, 0]
        if best < INF:
            pi[R0 + r] = best
            if capacity[r] > 0 and (not have_t or best < pi[T]):
                pi[T] = best
                have_t = True

    dist = np.empty(V, dtype=np.int64)
    parent = np.empty(V, dtype=np.int64)
    done = np.empty(V, dtype=np.bool_)
    augmentations = 0
    while True:
        dist[:] = INF
        parent[:] = -1
        done[:] = False
        dist[0] = 0
        done[0] = True
        for p in range(n_p):
            if fs[p] < supply[p]:
                dist[1 + p] = pi[0] - pi[1 + p]
                parent[1 + p] = 0
        while True:
            v = -1
            best = INF
            for i in range(1, V):
                if not done[i] and dist[i] < best:
                    best = dist[i]
                    v = i
            if v < 0:
                break
            done[v] = True
            if v == T:
                break
            dv = dist[v] + pi[v]
            if v < R0:
                p = v - 1
                for r in range(n_r):
                    node = R0 + r
                    if done[node]:
                        continue
                    j = jf[p, r]
                    if j < n_runs[p, r]:
                        red = -run_cost[p, r, j] + dv - pi[node]
                        if check_reduced and red < dist[v]:
                            raise AssertionError("negative reduced cost on a forward pair arc")
                        if red < dist[node]:
                            dist[node] = red
                            parent[node] = v
            else:
                r = v - R0
                if ft[r] < capacity[r] and not done[T]:
                    nd = dv - pi[T]
                    if nd < dist[T]:
                        dist[T] = nd
                        parent[T] = v
                for p in range(n_p):
                    node = 1 + p
                    u = units[p, r]
                    if u == 0 or done[node]:
                        continue
                    j = jf[p, r]
                    if not (j < n_runs[p, r] and u > _run_start(run_end, p, r, j)):
                        j -= 1
                    red = run_cost[p, r, j] + dv - pi[node]
                    if check_reduced and red < dist[v]:
                        raise AssertionError("negative reduced cost on a backward pair arc")
                    if red < dist[node]:
                        dist[node] = red
                        parent[node] = v
        if not done[T]:
            break
        dT = dist[T]
        for i in range(V):
            pi[i] += dist[i] if dist[i] < dT else dT

        # bottleneck along the path
        r_last = parent[T] - R0
        delta = capacity[r_last] - ft[r_last]
        v = parent[T]
        while True:
            a = parent[v]
            if a == 0:
                p = v - 1
                if supply[p] - fs[p] < delta:
                    delta = supply[p] - fs[p]
                break
            if a < R0:
                p = a - 1
                r = v - R0
                amt = run_end[p, r, jf[p, r]] - units[p, r]
            else:
                p = v - 1
                r = a - R0
                j = jf[p, r]
                if not (j < n_runs[p, r] and units[p, r] > _run_start(run_end, p, r, j)):
                    j -= 1
                amt = units[p, r] - _run_start(run_end, p, r, j)
            if amt < delta:
                delta = amt
            v = a
        # apply it
        ft[r_last] += delta
        v = parent[T]
        while True:
            a = parent[v]
            if a == 0:
                fs[v - 1] += delta
                break
            if a < R0:
                p = a - 1
                r = v - R0
                units[p, r] += delta
                if units[p, r] == run_end[p, r, jf[p, r]]:
                    jf[p, r] += 1
            else:
                p = v - 1
                r = a - R0
                j = jf[p, r]
                if not (j < n_runs[p, r] and units[p, r] > _run_start(run_end, p, r, j)):
                    j -= 1
                units[p, r] -= delta
                jf[p, r] = j
            v = a
        augmentations += 1
    return units, augmentations


def max_cost_max_flow(net, check_reduced=False):
    """Maximum flow of maximum total cost, by successive shortest paths.

    Costs are negated and shortest paths found by Dijkstra on reduced costs
    (node potentials from an initial Bellman-Ford pass). Ties among equal
    tentative distances are settled in node-index order: source, papers,
    reviewers, sink. Each augmentation pushes the bottleneck over whole runs.
    With ``check_reduced`` every scanned arc is asserted to have a
    nonnegative reduced cost.
    """
    units, augmentations = _ssp(
        np.ascontiguousarray(net.supply, dtype=np.int64),
        np.ascontiguousarray(net.capacity, dtype=np.int64),
        np.ascontiguousarray(net.run_cost, dtype=np.int64),
        np.ascontiguousarray(net.run_end, dtype=np.int64),
        np.ascontiguousarray(net.n_runs, dtype=np.int64),
        check_reduced,
    )
    return FlowResult(units, int(units.sum()), flow_cost(net, units), int(augmentations))


def flow_cost(net, units):
    """Exact total cost (Python int) of a prefix-respecting pair flow."""
    total = 0
    n_p, n_r = units.shape
    start = np.concatenate(
        [np.zeros((n_p, n_r, 1), dtype=np.int64), net.run_end[:, :, :-1]], axis=2
    )
    used = np.clip(units[:, :, None] - start, 0, net.run_end - start)
    valid = np.arange(net.run_cost.shape[2])[None, None, :] < net.n_runs[:, :, None]
    used = np.where(valid, used, 0)
    for c, m in zip(net.run_cost[used > 0].tolist(), used[used > 0].tolist()):
        total += c * m
    return total

