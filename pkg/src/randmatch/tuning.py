"""Quality-floor hyperparameter searches.

Given a floor on expected quality, find the smallest PLRA cap that meets it
and then the strongest perturbation (largest beta or alpha) that still
meets it at a cap slightly above that, ``Q = min(Q_PLRA + delta, 1)``.

Caps are searched on the rational grid ``{k * search_tol}``, so a default
``search_tol`` of 1e-3 yields caps like ``Fraction(500, 1000) = 1/2``.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import FloorUnachievable, InvalidParameter, NonMonotoneDetected
from .instance import check_feasibility
from .rational import to_rational
from .solvers import SolverConfig, max_quality, solve_pm_exact, solve_plra

# Qualities are floats from iterative solvers; a floor counts as met within
# this relative slack (scaled by max(M, 1)).
QUALITY_RTOL = 1e-9


@dataclass
class TuningConfig:
    """Settings for the floor searches.

    Exactly one of ``floor`` (absolute quality) and ``eta`` (fraction of the
    maximum quality M) should be given; with neither, eta = 1.
    """

    floor: float = None
    eta: float = None
    delta: float = 0.02
    search_tol: float = 1e-3
    beta_max: float = 1.0
    alpha_max: float = 64.0
    alpha_steps: int = 40
    alpha_scan: int = 8
    solver_tol: float = 1e-9

    def __post_init__(self):
        if self.floor is not None and self.eta is not None:
            raise InvalidParameter("give either floor or eta, not both")
        if self.eta is not None and not 0 <= self.eta <= 1:
            raise InvalidParameter(f"eta must lie in [0, 1], got {self.eta}")
        if not 0 <= self.delta <= 1:
            raise InvalidParameter(f"delta must lie in [0, 1], got {self.delta}")
        if not 0 < self.search_tol <= 1:
            raise InvalidParameter(f"search_tol must lie in (0, 1], got {self.search_tol}")
        if not 0 <= self.beta_max <= 1:
            raise InvalidParameter("beta_max must lie in [0, 1]")
        if not self.alpha_max > 0:
            raise InvalidParameter("alpha_max must be > 0")
        if self.alpha_steps < 1 or self.alpha_scan < 0:
            raise InvalidParameter("alpha_steps must be >= 1 and alpha_scan >= 0")

    def resolve_floor(self, inst):
        """(absolute floor, M) for this instance."""
        M = max_quality(inst)
        if self.floor is not None:
            return float(self.floor), M
        eta = 1.0 if self.eta is None else self.eta
        return eta * M, M

    def echo(self):
        return {
            "floor": self.floor,
            "eta": self.eta,
            "delta": self.delta,
            "search_tol": self.search_tol,
            "beta_max": self.beta_max,
            "alpha_max": self.alpha_max,
            "alpha_steps": self.alpha_steps,
            "alpha_scan": self.alpha_scan,
            "solver_tol": self.solver_tol,
        }


@dataclass
class TuningResult:
    """Outcome of a search; unpacks as ``(Q, param)``."""

    Q: Fraction
    param: float
    quality: float
    floor: float
    max_quality: float
    q_plra: Fraction = None
    probes: list = field(default_factory=list)

    def __iter__(self):
        return iter((self.Q, self.param))


def meets(quality, floor, M):
    """Floor test with the module's relative slack."""
    return quality >= floor - QUALITY_RTOL * max(abs(M), 1.0)


def _check_floor(floor, M):
    if not meets(M, floor, M):
        raise FloorUnachievable(f"floor exceeds maximum quality ({floor!r} > M = {M!r})")


def _grid_step(search_tol):
    step = to_rational(search_tol)
    return step, math.ceil(1 / step)


def _grid_point(step, k, top):
    return min(step * k, Fraction(1)) if k < top else Fraction(1)


def plra_quality(inst, Q):
    return float(solve_plra(inst, Q).info["quality_exact"])


def _first_true(lo, hi, pred):
    """Smallest k in [lo, hi] with pred(k), assuming pred is monotone and pred(hi)."""
    while lo < hi:
        mid = (lo + hi) // 2
        if pred(mid):
            hi = mid
        else:
            lo = mid + 1
    return lo


def find_q_plra(inst, quality_floor, search_tol=1e-3, M=None):
    """Smallest grid cap Q whose PLRA solution has quality >= quality_floor."""
    M = max_quality(inst) if M is None else M
    _check_floor(quality_floor, M)
    step, top = _grid_step(search_tol)
    k_feas = _first_true(1, top, lambda k: check_feasibility(inst, _grid_point(step, k, top)))
    k = _first_true(k_feas, top, lambda k: meets(plra_quality(inst, _grid_point(step, k, top)), quality_floor, M))
    return _grid_point(step, k, top)


def _base(inst, cfg):
    floor, M = cfg.resolve_floor(inst)
    _check_floor(floor, M)
    q_plra = find_q_plra(inst, floor, cfg.search_tol, M=M)
    Q = min(q_plra + to_rational(cfg.delta), Fraction(1))
    return floor, M, q_plra, Q


def pm_quality(inst, Q, spec, tol=1e-9):
    x = solve_pm_exact(inst, SolverConfig(Q=Q, f=spec, tol=tol))
    return float((inst.S * x.x).sum())


def tune_pm_quadratic(inst, cfg):
    """Largest grid beta in [0, beta_max] whose PM-Q solution meets the floor.

    Bisection relies on quality being nonincreasing in beta.
    """
    floor, M, q_plra, Q = _base(inst, cfg)
    step = to_rational(cfg.search_tol)
    top = int(math.floor(Fraction(repr(float(cfg.beta_max))) / step))
    probes = []

    def quality(k):
        beta = float(step * k)
        q = pm_quality(inst, Q, f"quad:{beta!r}", cfg.solver_tol)
        probes.append((beta, q))
        return q

    if meets(quality(top), floor, M):
        k = top
    else:
        # largest k with quality(k) >= floor; k = 0 is linear PM, which meets it at Q >= Q_PLRA
        lo, hi = 0, top
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if meets(quality(mid), floor, M):
                lo = mid
            else:
                hi = mid
        k = lo
    beta = float(step * k)
    q = pm_quality(inst, Q, f"quad:{beta!r}", cfg.solver_tol)
    if not meets(q, floor, M):
        raise FloorUnachievable(f"PM-Q at Q={Q}, beta={beta} misses the floor ({q!r} < {floor!r})")
    return TuningResult(Q, beta, q, floor, M, q_plra, probes)


def _inversion(probes, floor, M):
    """A pair (a, b) with a < b, quality(a) below the floor and quality(b) meeting it."""
    fails = [(a, q) for a, q in probes if not meets(q, floor, M)]
    passes = [(a, q) for a, q in probes if meets(q, floor, M)]
    for a, qa in sorted(fails):
        for b, qb in sorted(passes, reverse=True):
            if b > a:
                return (a, qa), (b, qb)
    return None


def tune_pm_exponential(inst, cfg):
    """Largest alpha in (0, alpha_max] found by bisection whose PM-E solution meets the floor.

    Quality need not be monotone in alpha. A coarse geometric scan
    (``alpha_scan`` points) is probed first, and any inversion among all
    probes (a failing alpha below a passing one) raises
    :class:`NonMonotoneDetected` carrying the probes.
    """
    floor, M, q_plra, Q = _base(inst, cfg)
    probes = []

    def quality(alpha):
        q = pm_quality(inst, Q, f"exp:{alpha!r}", cfg.solver_tol)
        probes.append((alpha, q))
        return q

    def check():
        bad = _inversion(probes, floor, M)
        if bad:
            (a, qa), (b, qb) = bad
            raise NonMonotoneDetected(
                f"PM-E quality is not monotone in alpha: quality({a:g}) = {qa:.12g} < floor "
                f"{floor:.12g} <= quality({b:g}) = {qb:.12g}",
                {"Q": str(Q), "floor": floor, "low": (a, qa), "high": (b, qb), "probes": sorted(probes)},
            )

    top = float(cfg.alpha_max)
    for j in range(cfg.alpha_scan):
        quality(top / 2.0**j)
    check()
    if meets(quality(top) if cfg.alpha_scan == 0 else dict(probes)[top], floor, M):
        alpha = top
    else:
        passing = [a for a, q in probes if meets(q, floor, M)]
        lo = max(passing) if passing else 0.0
        hi = min(a for a, q in probes if not meets(q, floor, M) and a > lo)
        for _ in range(cfg.alpha_steps):
            mid = 0.5 * (lo + hi)
            if meets(quality(mid), floor, M):
                lo = mid
            else:
                hi = mid
        check()
        alpha = lo if lo > 0 else hi / 2.0
    q = pm_quality(inst, Q, f"exp:{alpha!r}", cfg.solver_tol)
    if not meets(q, floor, M):
        raise NonMonotoneDetected(
            f"PM-E at Q={Q}, alpha={alpha:g} misses the floor on re-solve ({q!r} < {floor!r})",
            {"Q": str(Q), "floor": floor, "alpha": alpha, "quality": q, "probes": sorted(probes)},
        )
    return TuningResult(Q, alpha, q, floor, M, q_plra, probes)


def quality_curve(inst, Q, family, params, tol=1e-9):
    """Quality of the exact PM solution at each parameter value, as (param, quality) pairs."""
    return [(float(p), pm_quality(inst, Q, f"{family}:{float(p)!r}", tol)) for p in params]
