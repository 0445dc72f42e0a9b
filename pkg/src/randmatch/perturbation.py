"""Concave perturbation functions applied entrywise to assignment probabilities.

Spec strings used on the command line::

    linear        f(x) = x
    quad:B        f(x) = x - B x^2             (0 <= B <= 1)
    exp:A         f(x) = 1 - exp(-A x)          (A > 0)
    tq:L          f_pr(x) = x - (L / S_pr) x^2       (per-pair, L >= 0)
    te:L          f_pr(x) = x - (L / S_pr) x ln x    (per-pair, L >= 0)
    ts:L          f_pr(x) = x + (L / S_pr) [x > 0]   (analysis only)

The per-pair families are only meaningful where S_pr > 0; pairs with zero
similarity fall back to f(x) = x, which contributes nothing to the objective.
"""

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import InvalidParameter, NotDifferentiable
from .instance import ValidationReport
from .rational import COST_SCALE

FAMILIES = (
    "linear",
    "quadratic",
    "exponential",
    "quadratic_targeted",
    "entropy_targeted",
    "support_targeted",
)
TARGETED = ("quadratic_targeted", "entropy_targeted", "support_targeted")

_SHORT = {
    "linear": "linear",
    "quad": "quadratic",
    "exp": "exponential",
    "tq": "quadratic_targeted",
    "te": "entropy_targeted",
    "ts": "support_targeted",
}
_LONG = {v: k for k, v in _SHORT.items()}

# conditional-gradient evaluation floor for families with f'(0) = +inf
LOG_CLAMP = 1e-12


@dataclass(frozen=True)
class PerturbationSpec:
    family: str = "linear"
    param: float = 0.0

    @classmethod
    def parse(cls, text):
        text = text.strip()
        name, _, value = text.partition(":")
        family = _SHORT.get(name, name)
        if family not in FAMILIES:
            raise InvalidParameter(f"unknown perturbation family {name!r}")
        if family == "linear":
            if value:
                raise InvalidParameter("linear perturbation takes no parameter")
            return cls("linear", 0.0)
        if not value:
            raise InvalidParameter(f"perturbation {name!r} needs a parameter, e.g. {name}:0.5")
        try:
            param = float(value)
        except ValueError as exc:
            raise InvalidParameter(f"bad perturbation parameter {value!r}") from exc
        return cls(family, param)

    def __str__(self):
        if self.family == "linear":
            return "linear"
        return f"{_LONG[self.family]}:{self.param!r}"


def quadratic(beta):
    return PerturbationSpec("quadratic", beta)


def exponential(alpha):
    return PerturbationSpec("exponential", alpha)


LINEAR = PerturbationSpec()


class PerturbationFunction:
    """Evaluator for f, f' and f'' plus the similarity-weighted objective terms.

    ``f``/``df``/``d2f`` take an optional similarity (scalar or array) that
    only the per-pair families use; it defaults to 1.
    """

    def __init__(self, spec):
        self.spec = spec
        self._custom = None

    @classmethod
    def from_callables(cls, f, df=None, name="custom"):
        """Wrap arbitrary callables; intended for exercising :func:`verify_perturbation`."""
        obj = cls(PerturbationSpec("linear"))
        obj._custom = (f, df, name)
        return obj

    @property
    def family(self):
        return self._custom[2] if self._custom else self.spec.family

    @property
    def param(self):
        return self.spec.param

    @property
    def is_linear(self):
        return self._custom is None and (
            self.family == "linear" or (self.family in ("quadratic", "quadratic_targeted", "entropy_targeted") and self.param == 0)
        )

    @property
    def differentiable(self):
        return self.family != "support_targeted" or self.param == 0

    def _coef(self, similarity):
        s = np.asarray(1.0 if similarity is None else similarity, dtype=float)
        with np.errstate(divide="ignore"):
            return np.where(s > 0, self.param / np.where(s > 0, s, 1.0), 0.0)

    def f(self, x, similarity=None):
        x = np.asarray(x, dtype=float)
        if self._custom:
            return np.vectorize(self._custom[0], otypes=[float])(x)
        fam, a = self.family, self.param
        if fam == "linear":
            return x.copy()
        if fam == "quadratic":
            return x - a * x * x
        if fam == "exponential":
            return -np.expm1(-a * x)
        c = self._coef(similarity)
        if fam == "quadratic_targeted":
            return x - c * x * x
        if fam == "entropy_targeted":
            return x - c * _xlogx(x)
        return x + c * (x > 0)

    def df(self, x, similarity=None):
        x = np.asarray(x, dtype=float)
        if self._custom:
            if self._custom[1] is None:
                h = 1e-7
                return (self.f(np.minimum(x + h, 1.0)) - self.f(np.maximum(x - h, 0.0))) / (
                    np.minimum(x + h, 1.0) - np.maximum(x - h, 0.0)
                )
            return np.vectorize(self._custom[1], otypes=[float])(x)
        fam, a = self.family, self.param
        if fam == "linear":
            return np.ones_like(x)
        if fam == "quadratic":
            return 1.0 - 2.0 * a * x
        if fam == "exponential":
            return a * np.exp(-a * x)
        c = self._coef(similarity)
        if fam == "quadratic_targeted":
            return 1.0 - 2.0 * c * x
        if fam == "entropy_targeted":
            with np.errstate(divide="ignore"):
                logs = np.log(x)
            return np.where(c > 0, 1.0 - c * (logs + 1.0), 1.0)
        raise NotDifferentiable("support-targeted perturbation is discontinuous at 0")

    def d2f(self, x, similarity=None):
        x = np.asarray(x, dtype=float)
        fam, a = self.family, self.param
        if self._custom:
            raise NotImplementedError("second derivative unavailable for custom callables")
        if fam == "linear":
            return np.zeros_like(x)
        if fam == "quadratic":
            return np.full_like(x, -2.0 * a)
        if fam == "exponential":
            return -a * a * np.exp(-a * x)
        c = self._coef(similarity)
        if fam == "quadratic_targeted":
            return -2.0 * c * np.ones_like(x)
        if fam == "entropy_targeted":
            with np.errstate(divide="ignore"):
                return np.where(c > 0, -c / x, 0.0)
        raise NotDifferentiable("support-targeted perturbation is discontinuous at 0")

    # similarity-weighted terms S * f(x); per-pair families cancel the 1/S
    def weighted(self, x, S):
        x = np.asarray(x, dtype=float)
        S = np.asarray(S, dtype=float)
        fam, a = self.family, self.param
        if self._custom or fam in ("linear", "quadratic", "exponential"):
            return S * self.f(x)
        pos = S > 0
        if fam == "quadratic_targeted":
            return np.where(pos, S * x - a * x * x, 0.0)
        if fam == "entropy_targeted":
            return np.where(pos, S * x - a * _xlogx(x), 0.0)
        return np.where(pos, S * x + a * (x > 0), 0.0)

    def weighted_grad(self, x, S, clamp=LOG_CLAMP):
        x = np.asarray(x, dtype=float)
        S = np.asarray(S, dtype=float)
        fam, a = self.family, self.param
        if self._custom or fam in ("linear", "quadratic", "exponential"):
            return S * self.df(x)
        pos = S > 0
        if fam == "quadratic_targeted":
            return np.where(pos, S - 2.0 * a * x, 0.0)
        if fam == "entropy_targeted":
            return np.where(pos, S - a * (np.log(np.maximum(x, clamp)) + 1.0), 0.0)
        raise NotDifferentiable("support-targeted perturbation is discontinuous at 0")

    def weighted_hess(self, x, S, clamp=LOG_CLAMP):
        x = np.asarray(x, dtype=float)
        S = np.asarray(S, dtype=float)
        fam, a = self.family, self.param
        if self._custom or fam in ("linear", "quadratic", "exponential"):
            return S * self.d2f(x)
        pos = S > 0
        if fam == "quadratic_targeted":
            return np.where(pos, -2.0 * a, 0.0) * np.ones_like(x)
        if fam == "entropy_targeted":
            return np.where(pos, -a / np.maximum(x, clamp), 0.0)
        raise NotDifferentiable("support-targeted perturbation is discontinuous at 0")

    def pquality(self, x, S):
        """Perturbed quality sum_{p,r} S_pr * f(x_pr)."""
        return float(self.weighted(x, S).sum())

    def arc_costs(self, S, w, K):
        """Fixed-point costs of the K unit arcs per pair: S*[f(i/w) - f((i-1)/w)].

        Returns an int64 array of shape (n_p, n_r, K). Polynomial families are
        evaluated in exact rational arithmetic before rounding.
        """
        S = np.asarray(S, dtype=float)
        n_p, n_r = S.shape
        fam, a = self.family, self.param
        if not self.differentiable:
            raise NotDifferentiable("support-targeted perturbation cannot be used by the solvers")
        if self._custom is None and fam in ("linear", "quadratic", "quadratic_targeted"):
            out = np.empty((n_p, n_r, K), dtype=np.int64)
            coef = Fraction(repr(float(a)))
            w2 = w * w
            for p in range(n_p):
                for r in range(n_r):
                    s = Fraction(float(S[p, r]))
                    if s == 0:
                        out[p, r, :] = 0
                        continue
                    for i in range(1, K + 1):
                        if fam == "linear":
                            inc = s / w
                        elif fam == "quadratic":
                            inc = s * (w - coef * (2 * i - 1)) / w2
                        else:
                            inc = (s * w - coef * (2 * i - 1)) / w2
                        out[p, r, i - 1] = round(inc * COST_SCALE)
            return out
        grid = np.arange(K + 1) / w
        vals = self.weighted(grid[None, None, :], S[:, :, None])
        inc = np.diff(vals, axis=2)
        return np.rint(inc * COST_SCALE).astype(np.int64)


def _xlogx(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(x > 0, x * np.log(np.where(x > 0, x, 1.0)), 0.0)


def make_perturbation(spec):
    """Validate a spec (or spec string) and return its evaluator."""
    if isinstance(spec, str):
        spec = PerturbationSpec.parse(spec)
    if isinstance(spec, PerturbationFunction):
        return spec
    fam, a = spec.family, spec.param
    if fam not in FAMILIES:
        raise InvalidParameter(f"unknown perturbation family {fam!r}")
    if not np.isfinite(a):
        raise InvalidParameter("perturbation parameter must be finite")
    if fam == "quadratic" and not 0 <= a <= 1:
        raise InvalidParameter(f"quadratic beta must lie in [0, 1], got {a}")
    if fam == "exponential" and not a > 0:
        raise InvalidParameter(f"exponential alpha must be > 0, got {a}")
    if fam in TARGETED and a < 0:
        raise InvalidParameter(f"lambda must be >= 0, got {a}")
    return PerturbationFunction(spec)


def verify_perturbation(f, grid_size=101, similarity=1.0):
    """Check f(0) = 0, monotonicity and concavity of f on a uniform grid of [0, 1]."""
    if grid_size < 3:
        raise InvalidParameter("grid_size must be >= 3")
    report = ValidationReport()
    if isinstance(f, PerturbationSpec):
        f = make_perturbation(f)
    grid = np.linspace(0.0, 1.0, grid_size)
    vals = f.f(grid, similarity)
    if vals[0] != 0:
        report.violations.append(f"f(0) = {vals[0]!r}, expected 0")
    steps = np.diff(vals)
    if np.any(steps < -1e-12):
        i = int(np.argmax(steps < -1e-12))
        report.violations.append(f"not nondecreasing: f drops between x={grid[i]:.4g} and x={grid[i + 1]:.4g}")
    second = np.diff(vals, 2)
    if np.any(second > 1e-9):
        i = int(np.argmax(second > 1e-9))
        report.violations.append(f"not concave: positive second difference at x={grid[i + 1]:.4g}")
    if not f.differentiable:
        report.violations.append("not differentiable: jump at 0")
    else:
        slope0 = float(np.asarray(f.df(0.0, similarity)))
        if not np.isfinite(slope0) or slope0 > 1e12:
            report.notes.append("derivative unbounded at 0")
    return report


def dominance_condition(f, spec):
    """Whether f'(0) < Dom(A) * f'(1) for a blockwise spec (read as f'(1) > 0 when Dom is infinite)."""
    f = make_perturbation(f)
    d0 = float(f.df(0.0))
    d1 = float(f.df(1.0))
    dom = spec.dominance()
    if np.isinf(dom):
        return d1 > 0
    return d0 < dom * d1


def level_condition(f, levels):
    """Whether f'(0) < (v_i / v_{i-1}) f'(1) for all consecutive similarity levels."""
    f = make_perturbation(f)
    d0 = float(f.df(0.0))
    d1 = float(f.df(1.0))
    return all(d0 < (hi / lo) * d1 for lo, hi in zip(levels, levels[1:]))
