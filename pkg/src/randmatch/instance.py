"""Problem data, validation, and structured instance generators."""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidSpec
from .rational import as_cap


@dataclass
class ValidationReport:
    """Outcome of a report-style check: violations make it invalid, notes do not."""

    violations: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.violations

    def __bool__(self):
        return self.ok

    def __contains__(self, text):
        return any(text in v for v in self.violations + self.notes)


@dataclass(frozen=True)
class ProblemInstance:
    """Loads plus a nonnegative similarity matrix (papers x reviewers).

    Construction never validates, so that broken inputs can still be
    reported by :func:`validate_instance`; solvers call :meth:`require_valid`.
    """

    S: np.ndarray
    l_p: int
    l_r: int

    def __post_init__(self):
        S = np.array(self.S, dtype=float)
        if S.ndim != 2:
            raise InvalidSpec(f"similarity matrix must be 2-D, got shape {S.shape}")
        S.setflags(write=False)
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "l_p", int(self.l_p))
        object.__setattr__(self, "l_r", int(self.l_r))

    @property
    def n_p(self):
        return self.S.shape[0]

    @property
    def n_r(self):
        return self.S.shape[1]

    @property
    def total_similarity(self):
        return float(self.S.sum())

    def require_valid(self):
        report = validate_instance(self)
        if not report.ok:
            raise InvalidSpec("invalid instance: " + "; ".join(report.violations))
        return self

    def __eq__(self, other):
        if not isinstance(other, ProblemInstance):
            return NotImplemented
        return (self.l_p, self.l_r) == (other.l_p, other.l_r) and np.array_equal(
            self.S, other.S
        )

    __hash__ = None


def validate_instance(inst):
    """List every violated instance invariant; an empty report means valid."""
    report = ValidationReport()
    n_p, n_r = inst.S.shape
    if n_p < 1 or n_r < 1:
        report.violations.append("empty instance: need at least one paper and one reviewer")
    if inst.l_p < 1:
        report.violations.append(f"l_p must be >= 1, got {inst.l_p}")
    if inst.l_p > n_r:
        report.violations.append(f"l_p={inst.l_p} exceeds reviewer count {n_r}")
    if inst.l_r < 1:
        report.violations.append(f"l_r must be >= 1, got {inst.l_r}")
    if not np.all(np.isfinite(inst.S)):
        report.violations.append("non-finite similarity")
    elif np.any(inst.S < 0):
        report.violations.append("negative similarity")
    if n_p * inst.l_p > n_r * inst.l_r:
        report.violations.append(
            f"load infeasible: n_p*l_p={n_p * inst.l_p} > n_r*l_r={n_r * inst.l_r}"
        )
    return report


def check_feasibility(inst, Q):
    """True iff some x has row sums l_p, column sums <= l_r and entries in [0, Q].

    Decided by a max-flow on the network scaled by Q's denominator.
    """
    from .flow import build_transport_network, max_cost_max_flow

    Q = as_cap(Q)
    a, b = Q.numerator, Q.denominator
    n_p, n_r = inst.S.shape
    net = build_transport_network(
        np.full(n_p, inst.l_p * b),
        np.full(n_r, inst.l_r * b),
        np.full((n_p, n_r), a),
    )
    return max_cost_max_flow(net).value == n_p * inst.l_p * b


@dataclass(frozen=True)
class BlockwiseSpec:
    """Block identity matrix plus paper/reviewer block sizes."""

    A: np.ndarray
    paper_sizes: tuple
    reviewer_sizes: tuple

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        A.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "paper_sizes", tuple(int(v) for v in self.paper_sizes))
        object.__setattr__(self, "reviewer_sizes", tuple(int(v) for v in self.reviewer_sizes))

    @property
    def k(self):
        return self.A.shape[0]

    def dominance(self):
        """sup{a : A_ii >= a * A_ij for all j != i}; inf when off-diagonals vanish."""
        best = np.inf
        for i in range(self.k):
            for j in range(self.k):
                if i != j and self.A[i, j] > 0:
                    best = min(best, self.A[i, i] / self.A[i, j])
        return float(best)

    def problems(self):
        out = []
        A = self.A
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
            return [f"block identity must be a non-empty square matrix, got shape {A.shape}"]
        if np.any(A < 0) or not np.all(np.isfinite(A)):
            out.append("block identity must be finite and nonnegative")
        for i in range(self.k):
            for j in range(self.k):
                if i != j and not A[i, i] > A[i, j]:
                    out.append(f"diagonal not dominant: A[{i},{i}]={A[i, i]} <= A[{i},{j}]={A[i, j]}")
        if len(self.paper_sizes) != self.k or len(self.reviewer_sizes) != self.k:
            out.append("need one paper size and one reviewer size per block")
        if any(v < 1 for v in self.paper_sizes + self.reviewer_sizes):
            out.append("block sizes must be positive")
        return out

    def paper_blocks(self):
        return np.repeat(np.arange(self.k), self.paper_sizes)

    def reviewer_blocks(self):
        return np.repeat(np.arange(self.k), self.reviewer_sizes)


def generate_blockwise(spec, l_p, l_r):
    """Block-constant similarity: S[p, r] = A[block(p), block(r)]."""
    problems = spec.problems()
    if problems:
        raise InvalidSpec("; ".join(problems))
    S = spec.A[np.ix_(spec.paper_blocks(), spec.reviewer_blocks())]
    return ProblemInstance(S, l_p, l_r)


@dataclass(frozen=True)
class RandomDiscreteSpec:
    levels: tuple
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(float(v) for v in self.levels))
        if not self.levels:
            raise InvalidSpec("need at least one similarity level")
        if self.levels[0] <= 0 or any(b <= a for a, b in zip(self.levels, self.levels[1:])):
            raise InvalidSpec("levels must be positive and strictly increasing")


def generate_random_discrete(n_p, n_r, spec, l_p=1, l_r=1):
    """Each similarity drawn i.i.d. uniformly from ``spec.levels``.

    Uses numpy's PCG64 generator seeded with ``spec.seed``.
    """
    rng = np.random.default_rng(spec.seed)
    idx = rng.integers(0, len(spec.levels), size=(n_p, n_r))
    return ProblemInstance(np.asarray(spec.levels)[idx], l_p, l_r)


def figure1_instance():
    """Two subject areas: 3 papers/3 reviewers and 2 papers/2 reviewers, one-to-one."""
    spec = BlockwiseSpec(np.eye(2), (3, 2), (3, 2))
    return generate_blockwise(spec, 1, 1)


def example1_instance():
    """3x3 instance on which exponential-perturbation quality is not monotone in alpha."""
    S = [[0.4, 0.0, 0.6], [0.8, 0.6, 0.0], [0.8, 0.6, 1.0]]
    return ProblemInstance(S, 1, 1)
