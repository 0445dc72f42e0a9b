from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import Bounds, LinearConstraint, linprog, minimize

from randmatch import ProblemInstance, RandomDiscreteSpec, compute_metrics, generate_random_discrete
from randmatch.errors import InvalidParameter
from randmatch.metrics import FractionalAssignment, assignment_problems
from randmatch.perturbation import PerturbationFunction, make_perturbation
from randmatch.solvers import (
    InfeasibleMarker,
    SolverConfig,
    max_quality,
    solve_balanced_greedy,
    solve_greedy,
    solve_plra,
    solve_pm_exact,
    solve_pm_flow,
)


def constraints(inst):
    n_p, n_r = inst.S.shape
    rows = np.kron(np.eye(n_p), np.ones(n_r))
    cols = np.kron(np.ones(n_p), np.eye(n_r))
    return rows, cols


def linprog_quality(inst, Q):
    rows, cols = constraints(inst)
    res = linprog(
        -inst.S.ravel(),
        A_ub=cols,
        b_ub=np.full(inst.n_r, inst.l_r),
        A_eq=rows,
        b_eq=np.full(inst.n_p, inst.l_p),
        bounds=(0, float(Q)),
        method="highs",
    )
    assert res.status == 0
    return -res.fun


def scipy_pm(inst, Q, spec):
    """Reference PM optimum by SciPy's trust-region constrained solver."""
    f = make_perturbation(spec)
    S = inst.S
    rows, cols = constraints(inst)
    x0 = np.full(S.size, inst.l_p / inst.n_r)
    res = minimize(
        lambda v: -f.pquality(v.reshape(S.shape), S),
        x0,
        jac=lambda v: -f.weighted_grad(v.reshape(S.shape), S).ravel(),
        method="trust-constr",
        constraints=[
            LinearConstraint(rows, inst.l_p, inst.l_p),
            LinearConstraint(cols, -np.inf, inst.l_r),
        ],
        bounds=Bounds(0, float(Q)),
        options={"gtol": 1e-10, "xtol": 1e-12, "maxiter": 3000},
    )
    return -res.fun


def small_instances():
    return st.builds(
        lambda n_p, n_r, seed: (n_p, n_r, seed),
        st.integers(1, 6),
        st.integers(3, 6),
        st.integers(0, 2**31),
    )


def make_inst(n_p, n_r, seed, levels=None):
    rng = np.random.default_rng(seed)
    S = rng.random((n_p, n_r)) if levels is None else rng.choice(levels, size=(n_p, n_r))
    return ProblemInstance(S, 1, -(-n_p // n_r) + 1)


def test_config_validation():
    with pytest.raises(InvalidParameter):
        SolverConfig(w=0)
    with pytest.raises(InvalidParameter):
        SolverConfig(tol=0)
    with pytest.raises(InvalidParameter):
        SolverConfig(method="newton")
    assert SolverConfig(Q="1/2").echo()["Q"] == "1/2"


def test_fig1_plra_third(fig1):
    # block-B papers can place only 2/3 inside their block, so 1/3 each spills
    # into block A and the optimum is 3 - 2/3 + 4/3 = 11/3
    x = solve_plra(fig1, "1/3")
    assert x.info["quality_exact"] == Fraction(11, 3)
    assert linprog_quality(fig1, Fraction(1, 3)) == pytest.approx(11 / 3)
    assert np.allclose(x.x[3:, 3:], 1 / 3)


def test_fig1_plra_half(fig1):
    x = solve_plra(fig1, "1/2")
    m = compute_metrics(x, fig1)
    assert m.quality == 5
    assert m.maxprob <= 0.5
    assert not assignment_problems(x, fig1, cap=Fraction(1, 2))


def test_max_quality_values(fig1):
    assert max_quality(fig1) == 5
    assert max_quality(ProblemInstance(np.zeros((3, 3)), 1, 1)) == 0
    assert max_quality(ProblemInstance(np.eye(3), 1, 1)) == 3


def test_fig1_flow_and_exact_agree(fig1, fig1_uniform):
    cfg = SolverConfig(Q="1/2", f="quad:0.25", w=6)
    a = solve_pm_flow(fig1, cfg)
    b = solve_pm_exact(fig1, cfg)
    assert np.abs(a.x - fig1_uniform).max() < 1e-12
    assert np.abs(b.x - fig1_uniform).max() < 1e-8
    assert b.info["converged"]


def test_fw_method(fig1, fig1_uniform):
    x = solve_pm_exact(fig1, SolverConfig(Q="1/2", f="exp:1", method="fw", tol=1e-10))
    assert np.abs(x.x - fig1_uniform).max() < 1e-4
    assert x.info["method"] == "fw"


def test_custom_function_uses_fw(fig1, fig1_uniform):
    f = PerturbationFunction.from_callables(lambda t: np.sqrt(t + 1) - 1, lambda t: 0.5 / np.sqrt(t + 1))
    x = solve_pm_exact(fig1, SolverConfig(Q="1/2", f=f))
    assert x.info["method"] == "fw"
    assert np.abs(x.x - fig1_uniform).max() < 1e-4


def test_greedy_examples():
    inst = ProblemInstance([[4, 3, 2, 1], [1, 2, 3, 4]], 1, 1)
    x = solve_greedy(inst, "1/2")
    assert x.x.tolist() == [[0.5, 0.5, 0, 0], [0, 0, 0.5, 0.5]]
    det = solve_greedy(inst, 1)
    assert det.x.tolist() == [[1, 0, 0, 0], [0, 0, 0, 1]]


def test_greedy_overload_marker(fig1):
    marker = solve_greedy(fig1, "1/2")
    assert isinstance(marker, InfeasibleMarker)
    assert not marker


def test_balanced_greedy_fig1(fig1, fig1_uniform):
    x = solve_balanced_greedy(fig1, "1/2")
    assert isinstance(x, FractionalAssignment)
    assert np.allclose(x.x, fig1_uniform)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2**31))
def test_balanced_equals_greedy_on_distinct_levels(n_p, seed):
    rng = np.random.default_rng(seed)
    S = np.array([rng.permutation(6) + 1.0 for _ in range(n_p)])
    inst = ProblemInstance(S, 1, n_p)
    for Q in ("1/3", "2/5", "1"):
        assert np.array_equal(solve_greedy(inst, Q).x, solve_balanced_greedy(inst, Q).x)


@settings(max_examples=30, deadline=None)
@given(small_instances(), st.sampled_from(["1/2", "1/3", "3/4", "1"]))
def test_plra_matches_linprog(case, Q):
    inst = make_inst(*case)
    x = solve_plra(inst, Q)
    assert not assignment_problems(x, inst, cap=Fraction(Q))
    assert float(x.info["quality_exact"]) == pytest.approx(linprog_quality(inst, Fraction(Q)), abs=1e-8)


@settings(max_examples=15, deadline=None)
@given(small_instances(), st.sampled_from(["quad:0.5", "exp:2.0", "tq:0.3"]), st.sampled_from(["1/2", "1"]))
def test_pm_exact_beats_scipy(case, spec, Q):
    inst = make_inst(*case)
    x = solve_pm_exact(inst, SolverConfig(Q=Q, f=spec, tol=1e-10))
    assert not assignment_problems(x, inst, cap=Fraction(Q))
    ref = scipy_pm(inst, Fraction(Q), spec)
    assert x.info["pquality"] >= ref - 1e-6 * max(1, inst.total_similarity)


@settings(max_examples=20, deadline=None)
@given(small_instances(), st.sampled_from([2, 5, 10]), st.sampled_from(["quad:0.5", "exp:3.0"]))
def test_flow_error_bound(case, w, spec):
    inst = make_inst(*case)
    cfg = SolverConfig(Q=1, f=spec, w=w)
    flow = solve_pm_flow(inst, cfg)
    exact = solve_pm_exact(inst, cfg)
    f = make_perturbation(spec)
    bound = float(f.f(1 / w)) * inst.total_similarity + cfg.tol * inst.total_similarity
    assert not assignment_problems(flow, inst, cap=1)
    assert flow.info["pquality"] >= exact.info["pquality"] - bound


@settings(max_examples=15, deadline=None)
@given(small_instances())
def test_plra_quality_nondecreasing_in_cap(case):
    inst = make_inst(*case)
    qs = [solve_plra(inst, Q).info["quality_exact"] for Q in ("1/2", "3/5", "3/4", "1")]
    assert qs == sorted(qs)


@settings(max_examples=10, deadline=None)
@given(small_instances())
def test_quality_nonincreasing_in_beta(case):
    inst = make_inst(*case)
    quals = [compute_metrics(solve_pm_exact(inst, SolverConfig(Q=1, f=f"quad:{b}")), inst).quality for b in (0.1, 0.4, 0.7, 1.0)]
    assert all(a >= b - 1e-7 for a, b in zip(quals, quals[1:]))


def test_single_pair_forced():
    x = solve_pm_flow(ProblemInstance([[0.3]], 1, 1), SolverConfig(Q=1, f="exp:1", w=3))
    assert x.x.tolist() == [[1.0]]


def test_flow_linear_equals_plra():
    inst = make_inst(5, 4, 11)
    for Q, w in (("1/2", 4), ("2/3", 6), ("1", 3)):
        x = solve_pm_flow(inst, SolverConfig(Q=Q, f="linear", w=w))
        assert compute_metrics(x, inst).quality == pytest.approx(float(solve_plra(inst, Q).info["quality_exact"]), abs=1e-9)


def test_exact_close_to_fine_flow(fig1):
    cfg = SolverConfig(Q="1/2", f="quad:0.25", w=600, tol=1e-8)
    assert solve_pm_exact(fig1, cfg).info["pquality"] == pytest.approx(solve_pm_flow(fig1, cfg).info["pquality"], abs=1e-6)


def test_exact_linear_is_plra_optimal():
    inst = make_inst(6, 4, 3)
    x = solve_pm_exact(inst, SolverConfig(Q="1/2", f="linear"))
    assert compute_metrics(x, inst).quality == pytest.approx(float(solve_plra(inst, "1/2").info["quality_exact"]))


def test_support_targeted_rejected(fig1):
    from randmatch.errors import NotDifferentiable

    with pytest.raises(NotDifferentiable):
        solve_pm_exact(fig1, SolverConfig(Q="1/2", f="ts:0.1"))
