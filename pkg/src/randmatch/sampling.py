"""Turning a fractional assignment into a lottery over deterministic ones.

:func:`decompose` writes x as a convex combination of binary assignments
that respect every load, and :func:`sample_assignment` draws from it.

The decomposition pads x with one dummy paper that soaks up every
reviewer's unused capacity, so all row and column totals become integers
that hold with equality. Each peel then picks an integral matrix X that
rounds every entry of the current residual point z either down or up
(found as a flow with exact demands), and removes as much of X as
possible without leaving the box [floor(z), ceil(z)]. At least one
fractional entry becomes integral per peel.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import MalformedInput, RandMatchError
from .flow import build_transport_network, max_cost_max_flow
from .metrics import SUPPORT_TOL, FractionalAssignment, assignment_problems

SNAP = 1e-9
RECONSTRUCTION_TOL = 1e-6
# Exact mode is used when every entry is p/q with q <= MAX_DENOMINATOR.
MAX_DENOMINATOR = 10**6
_INT_LIMIT = 2**62


@dataclass
class DeterministicAssignment:
    """Binary paper-by-reviewer matrix."""

    X: np.ndarray

    def __post_init__(self):
        self.X = np.asarray(self.X).astype(np.int8)

    def problems(self, inst):
        out = []
        if self.X.shape != inst.S.shape:
            return [f"shape {self.X.shape} does not match instance {inst.S.shape}"]
        if not np.isin(self.X, (0, 1)).all():
            out.append("entries are not binary")
        if np.any(self.X.sum(axis=1) != inst.l_p):
            out.append(f"row sums differ from l_p={inst.l_p}")
        if np.any(self.X.sum(axis=0) > inst.l_r):
            out.append(f"column sums exceed l_r={inst.l_r}")
        return out

    def pairs(self):
        """List of assigned (paper, reviewer) index pairs."""
        return [tuple(map(int, ix)) for ix in np.argwhere(self.X == 1)]

    def __eq__(self, other):
        return isinstance(other, DeterministicAssignment) and np.array_equal(self.X, other.X)


@dataclass
class AssignmentDistribution:
    """Finite lottery: ``components[i] = (X_i, gamma_i)``.

    ``exact_weights`` holds the weights as Fractions when the peeling ran in
    exact arithmetic, otherwise None.
    """

    components: list
    exact_weights: list = field(default=None, repr=False)

    def __len__(self):
        return len(self.components)

    @property
    def weights(self):
        return np.array([g for _, g in self.components], dtype=float)

    @property
    def matrices(self):
        return [c.X for c, _ in self.components]

    def marginals(self):
        out = np.zeros(self.components[0][0].X.shape)
        for comp, g in self.components:
            out += g * comp.X
        return out

    def problems(self, x, inst, tol=RECONSTRUCTION_TOL):
        """Violated distribution invariants with respect to target x (empty if fine)."""
        x = np.asarray(x, dtype=float)
        out = []
        w = self.weights
        if np.any(w <= 0):
            out.append("non-positive weight")
        if abs(w.sum() - 1.0) > 1e-9:
            out.append(f"weights sum to {w.sum()!r}")
        for i, (comp, _) in enumerate(self.components):
            bad = comp.problems(inst)
            if bad:
                out.append(f"component {i}: {'; '.join(bad)}")
            if np.any((comp.X == 1) & (x <= SUPPORT_TOL)):
                out.append(f"component {i} leaves supp(x)")
        err = np.abs(self.marginals() - x).max()
        if err > tol:
            out.append(f"reconstruction error {err:.3g}")
        return out


def _padded(x, inst):
    """Append the dummy row of reviewer slack; returns (z, row_totals)."""
    slack = inst.l_r - x.sum(axis=0)
    z = np.vstack([x, slack[None, :]])
    rows = np.full(inst.n_p + 1, inst.l_p, dtype=np.int64)
    rows[-1] = inst.n_r * inst.l_r - inst.n_p * inst.l_p
    return z, rows


def _exact_scale(z):
    """Common denominator L of all entries if they are small-denominator rationals, else None."""
    L = 1
    for v in np.unique(z):
        fr = Fraction(float(v)).limit_denominator(MAX_DENOMINATOR)
        if abs(float(fr) - v) > 1e-13:
            return None
        L = L * fr.denominator // math.gcd(L, fr.denominator)
        if L > MAX_DENOMINATOR**2:
            return None
    return L


def _rounding(floor, frac_mask, rows, cols):
    """Integral X with floor <= X <= floor + frac_mask and exact row/column totals."""
    row_need = rows - floor.sum(axis=1)
    col_need = cols - floor.sum(axis=0)
    if np.any(row_need < 0) or np.any(col_need < 0) or row_need.sum() != col_need.sum():
        raise RandMatchError("residual lost integral totals during peeling")
    net = build_transport_network(row_need, col_need, frac_mask.astype(np.int64))
    res = max_cost_max_flow(net)
    if res.value != int(row_need.sum()):
        raise RandMatchError("no integral rounding of the residual face")
    return floor + res.units


def _peel_exact(z, rows, cols, L):
    N = np.rint(z * L).astype(np.int64)
    M = np.int64(L)
    comps = []
    while M > 0:
        fl = N // M
        rem = N - fl * M
        frac = rem != 0
        X = _rounding(fl, frac, rows, cols)
        if not frac.any():
            comps.append((X, int(M)))
            break
        up = frac & (X > fl)
        cand = np.concatenate([rem[up], M - rem[frac & ~up]])
        t = min(int(cand.min()), int(M))
        comps.append((X, t))
        N = N - t * X
        M = M - t
    return [(X, Fraction(t, L)) for X, t in comps]


def _peel_float(z, rows, cols):
    R = z.astype(float).copy()
    m = 1.0
    comps = []
    while m > SNAP:
        near = np.rint(R / m)
        snap = np.abs(R - m * near) <= SNAP
        R = np.where(snap, m * near, R)
        fl = np.where(snap, near, np.floor(R / m)).astype(np.int64)
        frac = ~snap
        X = _rounding(fl, frac, rows, cols)
        if not frac.any():
            comps.append((X, m))
            m = 0.0
            break
        rem = R - m * fl
        up = frac & (X > fl)
        cand = np.concatenate([rem[up], m - rem[frac & ~up]])
        t = min(float(cand.min()), m)
        comps.append((X, t))
        R = R - t * X
        m = m - t
    if m > 0 and comps:
        # a residual mass below the snap tolerance: fold it into the last component
        X, t = comps[-1]
        comps[-1] = (X, t + m)
    return comps


def _reduce(mats, weights, support):
    """Caratheodory reduction until #components <= |support| + 1."""
    mats = list(mats)
    weights = [float(g) for g in weights]
    while len(mats) > support.sum() + 1:
        A = np.vstack([np.array([X[support] for X in mats], dtype=float).T, np.ones(len(mats))])
        null = np.linalg.svd(A)[2][-1]
        pos = null > 1e-12
        if not pos.any():
            null = -null
            pos = null > 1e-12
        ratios = np.where(pos, np.array(weights) / np.where(pos, null, 1.0), np.inf)
        j = int(np.argmin(ratios))
        step = ratios[j]
        weights = [g - step * n for g, n in zip(weights, null)]
        weights[j] = 0.0
        keep = [i for i, g in enumerate(weights) if g > 1e-15]
        mats = [mats[i] for i in keep]
        weights = [weights[i] for i in keep]
    total = sum(weights)
    return mats, [g / total for g in weights]


def decompose(x, inst):
    """Write x as a convex combination of load-feasible binary assignments.

    Entries that are rationals with denominators up to 10^6 (as produced by
    the flow-based solvers) are peeled in exact integer arithmetic; anything
    else uses floats with a 1e-9 snap. Raises MalformedInput when x is not a
    valid fractional assignment for ``inst``.
    """
    x = x.x if isinstance(x, FractionalAssignment) else np.asarray(x, dtype=float)
    bad = assignment_problems(x, inst, tol=1e-6)
    if bad:
        raise MalformedInput("cannot decompose: " + "; ".join(bad))
    x = np.where(x <= SUPPORT_TOL, 0.0, np.minimum(x, 1.0))
    x = np.where(x >= 1.0 - SNAP, 1.0, x)
    z, rows = _padded(x, inst)
    z[-1] = np.maximum(z[-1], 0.0)
    cols = np.full(inst.n_r, inst.l_r, dtype=np.int64)
    L = _exact_scale(z)
    if L is not None and L * max(int(rows.max()), inst.l_r) < _INT_LIMIT and np.all(
        np.rint(z * L).astype(np.int64).sum(axis=1) == rows * L
    ):
        comps = _peel_exact(z, rows, cols, L)
    else:
        comps = _peel_float(z, rows, cols)
    support = x > 0
    limit = int(support.sum()) + inst.n_r + 1
    if len(comps) > limit:
        raise RandMatchError(f"decomposition produced {len(comps)} components (> {limit})")
    mats = [X[:-1] for X, _ in comps]
    weights = [g for _, g in comps]
    exact = all(isinstance(g, Fraction) for g in weights)
    if len(mats) > support.sum() + 1:
        mats, weights = _reduce(mats, weights, support)
        exact = False
    if exact:
        merged = {}
        for X, g in zip(mats, weights):
            key = X.tobytes()
            merged[key] = (X, merged[key][1] + g) if key in merged else (X, g)
        mats = [v[0] for v in merged.values()]
        weights = [v[1] for v in merged.values()]
    dist = AssignmentDistribution(
        [(DeterministicAssignment(X), float(g)) for X, g in zip(mats, weights)],
        exact_weights=list(weights) if exact else None,
    )
    return dist


def sample_indices(dist, n, seed):
    """Indices of n independent component draws (seeded, reproducible)."""
    rng = np.random.default_rng(seed)
    w = dist.weights
    return rng.choice(len(w), size=n, p=w / w.sum())


def sample_assignment(dist, seed):
    """Draw one component with probability equal to its weight."""
    return dist.components[int(sample_indices(dist, 1, seed)[0])][0]
