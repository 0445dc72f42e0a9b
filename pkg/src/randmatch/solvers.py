"""Fractional assignment solvers: PLRA, PM (flow approximation and
conditional gradient), the uncapped optimum, and the Greedy oracles."""

import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import Infeasible, InvalidParameter, NotDifferentiable
from .flow import build_pm_network, linear_network, max_cost_max_flow
from .metrics import FractionalAssignment, assignment_problems
from .perturbation import LINEAR, make_perturbation
from .rational import COST_SCALE, as_cap


# Largest face system (free entries + rows + columns) the dense Newton
# refinement will factor.
POLISH_MAX = 1500


@dataclass
class SolverConfig:
    Q: object = 1
    f: object = LINEAR
    w: int = 10
    tol: float = 1e-9
    max_iters: int = 5000
    polish: bool = True
    method: str = "ipm"

    def __post_init__(self):
        self.Q = as_cap(self.Q)
        self.f = make_perturbation(self.f)
        if int(self.w) < 1:
            raise InvalidParameter("precision w must be >= 1")
        if not self.tol > 0:
            raise InvalidParameter("tol must be > 0")
        if self.method not in ("ipm", "fw"):
            raise InvalidParameter(f"unknown method {self.method!r} (expected 'ipm' or 'fw')")

    def echo(self):
        return {
            "Q": str(self.Q),
            "perturbation": str(self.f.spec),
            "w": int(self.w),
            "tol": self.tol,
            "max_iters": self.max_iters,
            "polish": self.polish,
            "method": self.method,
        }


@dataclass
class InfeasibleMarker:
    """Returned by the Greedy constructions when a reviewer is overloaded."""

    reason: str
    x: np.ndarray = field(default=None, repr=False)

    def __bool__(self):
        return False


def _require_loads(inst):
    inst.require_valid()


# ---------------------------------------------------------------- PLRA

def _lmo(inst, weights, Q):
    """Maximize sum(weights * x) over the capped polytope; returns integer units and denominator."""
    net, b = linear_network(inst, weights, Q)
    res = max_cost_max_flow(net)
    if res.value != inst.n_p * inst.l_p * b:
        raise Infeasible(f"no assignment satisfies the loads with cap Q={Q}")
    return res.units, b, res.augmentations


def _to_vertex(units, cost, cap, col_cap):
    """Move an optimal integral flow to a vertex of the capped polytope.

    Repeatedly finds a cycle among strictly-interior entries (plus slack of
    non-saturated reviewers) and shifts along it in the non-worsening
    direction until an entry hits a bound. Works in integer units.
    """
    units = units.copy()
    n_p, n_r = units.shape
    Z = n_p + n_r  # slack hub
    shifts = 0
    while True:
        cols = units.sum(axis=0)
        parent = list(range(Z + 1))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        adj = {i: [] for i in range(Z + 1)}
        cycle = None
        edges = [("x", p, r) for p in range(n_p) for r in range(n_r) if 0 < units[p, r] < cap]
        edges += [("s", r) for r in range(n_r) if cols[r] < col_cap]
        for e in edges:
            a, b = (e[1], n_p + e[2]) if e[0] == "x" else (n_p + e[1], Z)
            ra, rb = find(a), find(b)
            if ra == rb:
                cycle = _forest_path(adj, b, a) + [e]
                break
            parent[ra] = rb
            adj[a].append((b, e))
            adj[b].append((a, e))
        if cycle is None:
            return units, shifts
        signs = [1 if i % 2 == 0 else -1 for i in range(len(cycle))]
        gain = sum(s * int(cost[e[1], e[2]]) for s, e in zip(signs, cycle) if e[0] == "x")
        if gain < 0:
            signs = [-s for s in signs]
        step = None
        for s, e in zip(signs, cycle):
            if e[0] == "x":
                room = cap - units[e[1], e[2]] if s > 0 else units[e[1], e[2]]
            elif s < 0:
                room = col_cap - cols[e[1]]
            else:
                continue
            step = room if step is None else min(step, room)
        for s, e in zip(signs, cycle):
            if e[0] == "x":
                units[e[1], e[2]] += s * step
        shifts += 1


def _forest_path(adj, start, goal):
    """Edges on the unique forest path from start to goal."""
    prev = {start: None}
    stack = [start]
    while stack:
        v = stack.pop()
        if v == goal:
            break
        for nb, e in adj[v]:
            if nb not in prev:
                prev[nb] = (v, e)
                stack.append(nb)
    path = []
    v = goal
    while prev[v] is not None:
        v, e = prev[v]
        path.append(e)
    return path


def solve_plra(inst, Q):
    """Maximum-quality assignment with every entry capped at Q.

    Solved exactly by max-cost flow in units of 1/b for Q = a/b, then moved to
    a vertex of the polytope.
    """
    _require_loads(inst)
    t0 = time.perf_counter()
    Q = as_cap(Q)
    a, b = Q.numerator, Q.denominator
    costs = np.array([[round(Fraction(float(s)) * COST_SCALE) for s in row] for row in inst.S], dtype=np.int64)
    net, _ = linear_network(inst, costs, Q, scale=1)
    res = max_cost_max_flow(net)
    if res.value != inst.n_p * inst.l_p * b:
        raise Infeasible(f"no assignment satisfies the loads with cap Q={Q}")
    units, shifts = _to_vertex(res.units, costs, a, inst.l_r * b)
    exact_quality = sum(
        int(u) * Fraction(float(s)) for u, s in zip(units.ravel().tolist(), inst.S.ravel().tolist()) if u
    ) / b
    return FractionalAssignment(
        units / b,
        {
            "solver": "plra",
            "Q": str(Q),
            "w": b,
            "augmentations": res.augmentations,
            "vertex_shifts": shifts,
            "quality_exact": exact_quality,
            "wall_time": time.perf_counter() - t0,
        },
    )


def max_quality(inst):
    """Best achievable quality with no cap (Q = 1)."""
    _require_loads(inst)
    return float(solve_plra(inst, 1).info["quality_exact"])


# ---------------------------------------------------------------- PM, flow

def solve_pm_flow(inst, cfg):
    """Piecewise-linear flow approximation of PM at precision ``cfg.w``.

    Flow units /w give x; then every pair, in (p, r) order, is topped up by
    min(Q - x, remaining paper need, remaining reviewer room).
    """
    _require_loads(inst)
    if not cfg.f.differentiable:
        raise NotDifferentiable("support-targeted perturbation is analysis-only")
    t0 = time.perf_counter()
    Q, w = cfg.Q, int(cfg.w)
    net = build_pm_network(inst, Q, cfg.f, w)
    res = max_cost_max_flow(net)
    n_p, n_r = inst.n_p, inst.n_r
    x = [[Fraction(int(u), w) for u in row] for row in res.units.tolist()]
    rows = [sum(row) for row in x]
    cols = [sum(x[p][r] for p in range(n_p)) for r in range(n_r)]
    topped = 0
    for p in range(n_p):
        for r in range(n_r):
            inc = min(Q - x[p][r], inst.l_p - rows[p], inst.l_r - cols[r])
            if inc > 0:
                x[p][r] += inc
                rows[p] += inc
                cols[r] += inc
                topped += 1
    if sum(rows) != n_p * inst.l_p:
        raise Infeasible(f"flow approximation could not complete the loads (Q={Q}, w={w})")
    X = np.array([[float(v) for v in row] for row in x])
    return FractionalAssignment(
        X,
        {
            "solver": "pm_flow",
            "Q": str(Q),
            "w": w,
            "perturbation": str(cfg.f.spec),
            "flow_value": res.value,
            "flow_cost": res.cost,
            "augmentations": res.augmentations,
            "topped_up_pairs": topped,
            "pquality": cfg.f.pquality(X, inst.S),
            "wall_time": time.perf_counter() - t0,
        },
    )


# ---------------------------------------------------------------- PM, conditional gradient

def _line_search(f, S, x, d, gmax):
    """Largest-objective step in [0, gmax] along d for a concave objective (bisection on the slope)."""

    def slope(g):
        return float((f.weighted_grad(x + g * d, S) * d).sum())

    if slope(gmax) >= 0:
        return gmax
    lo, hi = 0.0, gmax
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if slope(mid) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * gmax:
            break
    return 0.5 * (lo + hi)


def _gap(f, S, x, inst, Q):
    G = f.weighted_grad(x, S)
    units, b, _ = _lmo(inst, G, Q)
    s = units / b
    return float((G * (s - x)).sum()), units, b


def solve_pm_exact(inst, cfg):
    """Solve PM to a duality-gap tolerance.

    ``cfg.method`` selects how the iterate is produced:

    * ``"ipm"`` (default): a primal-dual interior-point run, then Newton
      refinement on the identified face (when ``cfg.polish``), then pairwise
      conditional-gradient steps if the certificate is still above tolerance.
    * ``"fw"``: pairwise conditional gradient from the first linear-oracle
      vertex, with the same optional refinement at the end.

    Whatever the route, the returned point is certified by one exact call to
    the flow oracle: ``info['gap']`` = max_s <grad, s - x>, which bounds
    OPT - PQuality(x) by concavity.
    """
    _require_loads(inst)
    f = cfg.f
    if not f.differentiable:
        raise NotDifferentiable("support-targeted perturbation is analysis-only")
    t0 = time.perf_counter()
    S = inst.S
    Q = cfg.Q
    scale = max(inst.total_similarity, 1.0)
    target = cfg.tol * scale

    # also establishes feasibility (raises Infeasible otherwise)
    units, b, _ = _lmo(inst, f.weighted_grad(np.zeros_like(S), S), Q)
    start = units / b
    info = {
        "solver": "pm_exact",
        "method": cfg.method,
        "Q": str(Q),
        "perturbation": str(f.spec),
        "iterations": 0,
        "ipm_iterations": 0,
        "lmo_calls": 1,
        "polished": False,
    }
    method = cfg.method
    if method == "ipm" and (f.is_linear or not _has_hessian(f)):
        method = "fw"
    info["method"] = method

    def certify(cand):
        if assignment_problems(cand, inst, cap=Q):
            return np.inf
        info["lmo_calls"] += 1
        return _gap(f, S, cand, inst, Q)[0]

    x = None
    if method == "ipm":
        x, gap, info["ipm_iterations"] = _interior_point(
            f, S, float(Q), inst.l_p, inst.l_r, certify=certify, target=1e-3 * target
        )
    if x is None:
        x = start
        gap = certify(x)

    def refine(x, gap):
        if not cfg.polish or f.is_linear or not _has_hessian(f):
            return x, gap
        for eps in (1e-9, 1e-7, 1e-11, 1e-5, 1e-3):
            if gap <= 1e-3 * target:
                break
            cand = _polish(f, S, x, float(Q), inst.l_p, inst.l_r, eps)
            if cand is None:
                continue
            info["lmo_calls"] += 1
            cand_gap, _, _ = _gap(f, S, cand, inst, Q)
            if cand_gap < gap:
                x, gap = cand, cand_gap
                info["polished"] = True
                info["polish_eps"] = eps
        return x, gap

    def snap(x, gap):
        # Interior iterates keep tiny mass wherever the objective is nearly
        # flat; prefer the sparsest face solution that is still certified.
        if not cfg.polish or gap > target:
            return x, gap
        bound = max(gap, 1e-3 * target)
        for eps in (1e-5, 1e-7, 1e-9):
            if not np.any((x > 0) & (x <= eps)):
                continue
            cand = _polish(f, S, x, float(Q), inst.l_p, inst.l_r, eps)
            if cand is None or np.count_nonzero(cand) >= np.count_nonzero(x):
                continue
            info["lmo_calls"] += 1
            cand_gap, _, _ = _gap(f, S, cand, inst, Q)
            if cand_gap <= bound:
                info["snapped_eps"] = eps
                return cand, cand_gap
        return x, gap

    if method == "ipm":
        x, gap = refine(x, gap)
        x, gap = snap(x, gap)
    if gap > target:
        x, gap, its, calls, n_atoms = _pairwise_fw(f, S, inst, Q, x, target, cfg.max_iters)
        info["iterations"] = its
        info["lmo_calls"] += calls
        info["active_atoms"] = n_atoms
        info["fw_gap"] = gap
        x, gap = refine(x, gap)
    info["gap"] = max(gap, 0.0)
    info["converged"] = gap <= target
    info["pquality"] = f.pquality(x, S)
    info["wall_time"] = time.perf_counter() - t0
    return FractionalAssignment(x, info)


def _has_hessian(f):
    try:
        f.d2f(np.array([0.5]))
    except (NotImplementedError, NotDifferentiable):
        return False
    return True


def _pairwise_fw(f, S, inst, Q, x0, target, max_iters):
    """Pairwise conditional gradient started from x0 (treated as one atom).

    Returns (x, gap, iterations, oracle calls, active atoms).
    """
    atoms = [np.array(x0, dtype=float)]
    weights = [1.0]
    keys = {None: 0}
    x = atoms[0].copy()
    gap = np.inf
    calls = 0
    it = 0
    for it in range(1, max_iters + 1):
        G = f.weighted_grad(x, S)
        su, sb, _ = _lmo(inst, G, Q)
        calls += 1
        s = su / sb
        gap = float((G * (s - x)).sum())
        if gap <= target:
            break
        scores = np.array([float((G * a).sum()) if wt > 0 else np.inf for a, wt in zip(atoms, weights)])
        away = int(np.argmin(scores))
        d = s - atoms[away]
        if not np.any(d):
            break
        gamma = _line_search(f, S, x, d, weights[away])
        if gamma <= 0:
            break
        x = x + gamma * d
        key = su.tobytes()
        if key in keys:
            weights[keys[key]] += gamma
        else:
            keys[key] = len(atoms)
            atoms.append(s)
            weights.append(gamma)
        weights[away] -= gamma
        if weights[away] <= 1e-14:
            weights[away] = 0.0
            total = sum(weights)
            x = sum(a * (wt / total) for a, wt in zip(atoms, weights) if wt > 0)
    return x, gap, it, calls, sum(1 for wt in weights if wt > 0)


def _polish(f, S, x, Q, l_p, l_r, eps):
    """Newton refinement on the face identified with threshold eps; None if it fails to verify."""
    n_p, n_r = x.shape
    lo = x <= eps
    hi = (x >= Q - eps) & ~lo
    free = ~lo & ~hi
    cols = x.sum(axis=0)
    tight = cols >= l_r - max(eps, 1e-12) * n_p
    y = np.where(lo, 0.0, np.where(hi, Q, x))
    fp, fr = np.nonzero(free)
    nF = fp.size
    if nF + n_p + n_r > POLISH_MAX:
        return None
    tcols = np.flatnonzero(tight)
    tpos = -np.ones(n_r, dtype=int)
    tpos[tcols] = np.arange(tcols.size)
    nT = tcols.size
    N = nF + n_p + nT
    u = np.zeros(n_p)
    v = np.zeros(nT)
    for _ in range(60):
        g = f.weighted_grad(y, S)
        h = f.weighted_hess(y, S)
        vr = np.zeros(n_r)
        vr[tcols] = v
        r1 = g[fp, fr] - u[fp] - vr[fr]
        r2 = y.sum(axis=1) - l_p
        r3 = y.sum(axis=0)[tcols] - l_r
        res = np.concatenate([r1, r2, r3])
        if np.max(np.abs(res), initial=0.0) <= 1e-14 * max(1.0, np.abs(g).max(initial=0.0)):
            break
        J = np.zeros((N + 0, N))
        idx = np.arange(nF)
        J[idx, idx] = h[fp, fr]
        J[idx, nF + fp] = -1.0
        tj = tpos[fr]
        m = tj >= 0
        J[idx[m], nF + n_p + tj[m]] = -1.0
        J[nF + fp, idx] = 1.0
        J[nF + n_p + tj[m], idx[m]] = 1.0
        step = np.linalg.lstsq(J, -res, rcond=None)[0]
        dx = step[:nF]
        newv = y[fp, fr] + dx
        if np.any(newv < 0) or np.any(newv > Q):
            return None
        y = y.copy()
        y[fp, fr] = newv
        u = u + step[nF:nF + n_p]
        v = v + step[nF + n_p:]
    else:
        return None
    if np.any(y.sum(axis=0) > l_r + 1e-12):
        return None
    if np.max(np.abs(y.sum(axis=1) - l_p)) > 1e-12:
        return None
    return y


# ---------------------------------------------------------------- Greedy oracles

def _greedy_common(inst, Q):
    _require_loads(inst)
    Q = as_cap(Q)
    if Q * inst.n_r < inst.l_p:
        raise Infeasible(f"Q*n_r = {Q * inst.n_r} < l_p = {inst.l_p}")
    return Q


def _finish(inst, x, name):
    X = np.array([[float(v) for v in row] for row in x])
    cols = [sum(x[p][r] for p in range(inst.n_p)) for r in range(inst.n_r)]
    over = [r for r, c in enumerate(cols) if c > inst.l_r]
    if over:
        return InfeasibleMarker(f"{name}: reviewers {over} exceed l_r={inst.l_r}", X)
    return FractionalAssignment(X, {"solver": name})


def solve_greedy(inst, Q):
    """Each paper takes probability Q from its floor(l_p/Q) most similar reviewers and the remainder from the next one."""
    Q = _greedy_common(inst, Q)
    full = inst.l_p // Q
    rest = inst.l_p - Q * full
    x = [[Fraction(0)] * inst.n_r for _ in range(inst.n_p)]
    for p in range(inst.n_p):
        order = np.argsort(-inst.S[p], kind="stable")
        for k in range(int(full)):
            x[p][order[k]] = Q
        if rest:
            x[p][order[int(full)]] = rest
    return _finish(inst, x, "greedy")


def solve_balanced_greedy(inst, Q):
    """Greedy over similarity levels: saturate whole level sets at Q, split the last one evenly."""
    Q = _greedy_common(inst, Q)
    x = [[Fraction(0)] * inst.n_r for _ in range(inst.n_p)]
    for p in range(inst.n_p):
        row = inst.S[p]
        remain = Fraction(inst.l_p)
        for level in sorted(set(row.tolist()), reverse=True):
            group = np.flatnonzero(row == level)
            if remain >= Q * len(group):
                share = Q
            else:
                share = remain / len(group)
            for r in group:
                x[p][r] = share
            remain = max(Fraction(0), remain - Q * len(group))
    return _finish(inst, x, "balanced_greedy")


def _interior_point(f, S, Q, l_p, l_r, certify=None, target=0.0, max_iters=100):
    """Primal-dual interior-point iterates for max sum g(x) on the capped polytope.

    Mehrotra predictor-corrector on the problem with explicit upper-bound
    slacks s = Q - x and column slacks c, so each Newton system reduces to an
    (n_p + n_r)-square positive-definite Schur complement. Starts infeasible.

    Once an iterate is primal feasible with small complementarity it is
    passed to ``certify`` (which returns its duality gap); the loop ends at
    the first iterate whose gap is <= ``target``. Without ``certify`` the
    loop runs until complementarity is negligible. Returns (x, gap,
    iterations) for the best iterate seen, or (None, inf, iterations).
    """
    n_p, n_r = S.shape
    x = np.full((n_p, n_r), Q / 2.0)
    s = np.full((n_p, n_r), Q - Q / 2.0)
    c = np.ones(n_r)
    y = np.zeros(n_p)
    v = np.zeros(n_r)
    z0 = np.ones((n_p, n_r))
    zQ = np.ones((n_p, n_r))
    zc = np.ones(n_r)
    m = 2 * x.size + n_r
    best, best_gap = None, np.inf
    feas_tol = 1e-10
    it = 0
    for it in range(1, max_iters + 1):
        grad = -f.weighted_grad(x, S, clamp=1e-300)
        hess = np.maximum(-f.weighted_hess(x, S, clamp=1e-300), 0.0)
        r_d = grad - y[:, None] - v[None, :] - z0 + zQ
        r_c = -v - zc
        R_p = x.sum(axis=1) - l_p
        C_r = x.sum(axis=0) + c - l_r
        r_u = x + s - Q
        avg = ((x * z0).sum() + (s * zQ).sum() + (c * zc).sum()) / m
        primal = max(np.abs(R_p).max(), np.abs(C_r).max(), np.abs(r_u).max())
        if primal <= feas_tol and avg <= 1e-10:
            cand = np.clip(x, 0.0, Q)
            if certify is None:
                best, best_gap = cand, 0.0
                if avg <= 1e-14:
                    break
            else:
                gap = certify(cand)
                if gap < best_gap:
                    best, best_gap = cand, gap
                if best_gap <= target:
                    break
        if not np.isfinite(avg):
            break
        D = hess + z0 / x + zQ / s
        W = 1.0 / D
        e = c / zc
        M = np.zeros((n_p + n_r, n_p + n_r))
        M[np.arange(n_p), np.arange(n_p)] = W.sum(axis=1)
        M[:n_p, n_p:] = W
        M[n_p:, :n_p] = W.T
        M[n_p + np.arange(n_r), n_p + np.arange(n_r)] = W.sum(axis=0) + e

        def newton(comp0, compQ, compc):
            rho = -r_d + comp0 / x - (compQ + zQ * r_u) / s
            kappa = compc / c - r_c
            rhs = np.concatenate([
                -R_p - (rho * W).sum(axis=1),
                -C_r - (rho * W).sum(axis=0) - e * kappa,
            ])
            try:
                sol = np.linalg.solve(M, rhs)
            except np.linalg.LinAlgError:
                # Tight columns make (dy, dv) = (a, -a) a null direction that
                # leaves dx unchanged, so any least-squares solution will do.
                sol = np.linalg.lstsq(M, rhs, rcond=None)[0]
            dy, dv = sol[:n_p], sol[n_p:]
            dx = (dy[:, None] + dv[None, :] + rho) * W
            ds = -r_u - dx
            dc = e * (dv + kappa)
            dz0 = (comp0 - z0 * dx) / x
            dzQ = (compQ - zQ * ds) / s
            dzc = (compc - zc * dc) / c
            ap = min(_to_boundary(x, dx, 1.0), _to_boundary(s, ds, 1.0), _to_boundary(c, dc, 1.0))
            ad = min(_to_boundary(z0, dz0, 1.0), _to_boundary(zQ, dzQ, 1.0), _to_boundary(zc, dzc, 1.0))
            return (dx, ds, dc, dy, dv, dz0, dzQ, dzc), ap, ad

        # predictor (affine scaling) then centred corrector
        (dx, ds, dc, _, _, dz0, dzQ, dzc), ap, ad = newton(-x * z0, -s * zQ, -c * zc)
        ap, ad = min(ap, 1.0), min(ad, 1.0)
        mu_aff = (
            ((x + ap * dx) * (z0 + ad * dz0)).sum()
            + ((s + ap * ds) * (zQ + ad * dzQ)).sum()
            + ((c + ap * dc) * (zc + ad * dzc)).sum()
        ) / m
        sigma = min(1.0, (mu_aff / avg) ** 3)
        # complementarity far below 1e-17 only adds roundoff
        mu = max(sigma * avg, 1e-17)
        step, ap, ad = newton(mu - x * z0 - dx * dz0, mu - s * zQ - ds * dzQ, mu - c * zc - dc * dzc)
        dx, ds, dc, dy, dv, dz0, dzQ, dzc = step
        ap, ad = min(1.0, 0.995 * ap), min(1.0, 0.995 * ad)
        x = x + ap * dx
        s = s + ap * ds
        c = c + ap * dc
        y = y + ad * dy
        v = v + ad * dv
        z0 = z0 + ad * dz0
        zQ = zQ + ad * dzQ
        zc = zc + ad * dzc
    return best, best_gap, it


def _to_boundary(val, step, tau=0.995):
    """Largest fraction tau of the step to the boundary of val >= 0 (inf if none)."""
    neg = step < 0
    if not np.any(neg):
        return np.inf
    return float(tau * np.min(-val[neg] / step[neg]))
