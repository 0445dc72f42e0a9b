"""Quality and randomness metrics of a fractional assignment."""

from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DimensionMismatch, MalformedInput

SUPPORT_TOL = 1e-9
LOAD_TOL = 1e-9


@dataclass
class FractionalAssignment:
    """Matrix of marginal assignment probabilities plus solver diagnostics."""

    x: np.ndarray
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)

    @property
    def shape(self):
        return self.x.shape

    def __array__(self, dtype=None, copy=None):
        return self.x if dtype is None else self.x.astype(dtype)

    def problems(self, inst, tol=LOAD_TOL):
        return assignment_problems(self.x, inst, tol)


def _matrix(x):
    return x.x if isinstance(x, FractionalAssignment) else np.asarray(x, dtype=float)


def assignment_problems(x, inst, tol=LOAD_TOL, cap=None):
    """Violated invariants of a fractional assignment (empty list if valid)."""
    x = _matrix(x)
    out = []
    if x.shape != inst.S.shape:
        return [f"shape {x.shape} does not match instance {inst.S.shape}"]
    if not np.all(np.isfinite(x)):
        out.append("non-finite entries")
        return out
    if x.min() < -tol or x.max() > 1 + tol:
        out.append("entries outside [0, 1]")
    if cap is not None and x.max() > float(cap) + 1e-12:
        out.append(f"entry {x.max()!r} exceeds cap {float(cap)}")
    rows = x.sum(axis=1)
    if np.any(np.abs(rows - inst.l_p) > tol * max(1, inst.n_r)):
        out.append(f"row sums differ from l_p={inst.l_p} (worst {rows[np.argmax(np.abs(rows - inst.l_p))]!r})")
    cols = x.sum(axis=0)
    if np.any(cols > inst.l_r + tol * max(1, inst.n_p)):
        out.append(f"column sums exceed l_r={inst.l_r} (max {cols.max()!r})")
    return out


@dataclass
class MetricsReport:
    quality: float
    maxprob: float
    avgmaxp: float
    support: int
    entropy: float
    l2norm: float
    pquality: float = None
    support_tol: float = SUPPORT_TOL

    def as_dict(self):
        return asdict(self)

    RANDOMNESS = ("maxprob", "avgmaxp", "support", "entropy", "l2norm")


def entropy(x):
    x = np.asarray(x, dtype=float)
    pos = x[x > 0]
    return float(-(pos * np.log(pos)).sum()) + 0.0  # no negative zero


def compute_metrics(x, inst, f=None, support_tol=SUPPORT_TOL, check=True):
    """Quality, Maxprob, AvgMaxp, Support, Entropy (nats), L2Norm and, if f is given, PQuality."""
    x = _matrix(x)
    if x.shape != inst.S.shape:
        raise DimensionMismatch(f"assignment shape {x.shape} vs instance {inst.S.shape}")
    if check:
        problems = assignment_problems(x, inst, tol=1e-6)
        if problems:
            raise MalformedInput("; ".join(problems))
    pq = None
    if f is not None:
        from .perturbation import make_perturbation

        pq = make_perturbation(f).pquality(x, inst.S)
    return MetricsReport(
        quality=float((x * inst.S).sum()),
        maxprob=float(x.max()),
        avgmaxp=float(x.max(axis=1).mean()),
        support=int((x > support_tol).sum()),
        entropy=entropy(x),
        l2norm=float(np.sqrt((x * x).sum())),
        pquality=pq,
        support_tol=support_tol,
    )


def dominates(a, b, tol=1e-6):
    """Metric-by-metric comparison: which of the six metrics have ``a`` at least as good as ``b``.

    Returns a dict metric -> bool (weakly better within ``tol``).
    """
    return {
        "quality": a.quality >= b.quality - tol,
        "maxprob": a.maxprob <= b.maxprob + tol,
        "avgmaxp": a.avgmaxp <= b.avgmaxp + tol,
        "support": a.support >= b.support,
        "entropy": a.entropy >= b.entropy - tol,
        "l2norm": a.l2norm <= b.l2norm + tol,
    }
