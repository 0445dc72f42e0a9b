import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from randmatch import ProblemInstance, compute_metrics
from randmatch.errors import DimensionMismatch, MalformedInput
from randmatch.metrics import assignment_problems, dominates, entropy


def test_fig1_uniform_metrics(fig1, fig1_uniform):
    m = compute_metrics(fig1_uniform, fig1)
    assert m.quality == pytest.approx(5)
    assert m.maxprob == pytest.approx(0.5)
    assert m.avgmaxp == pytest.approx(0.4)
    assert m.support == 13
    assert m.entropy == pytest.approx(3 * math.log(3) + 2 * math.log(2))
    assert m.l2norm == pytest.approx(math.sqrt(2))


def test_fig1_plra_metrics(fig1, fig1_plra):
    m = compute_metrics(fig1_plra, fig1)
    assert m.quality == pytest.approx(5)
    assert m.maxprob == 0.5
    assert m.avgmaxp == 0.5
    assert m.support == 10
    assert m.entropy == pytest.approx(5 * math.log(2))
    assert m.l2norm == pytest.approx(math.sqrt(2.5))


def test_identity_metrics():
    inst = ProblemInstance(np.eye(3), 1, 1)
    m = compute_metrics(np.eye(3), inst)
    assert (m.quality, m.maxprob, m.support, m.entropy) == (3, 1, 3, 0)
    assert m.l2norm == pytest.approx(math.sqrt(3))


def test_pquality_reported(fig1, fig1_uniform):
    m = compute_metrics(fig1_uniform, fig1, f="quad:0.25")
    # 9 entries of 1/3 and 4 of 1/2 under x - x^2/4
    expected = 9 * (1 / 3 - 1 / 36) + 4 * (1 / 2 - 1 / 16)
    assert m.pquality == pytest.approx(expected)


def test_shape_and_load_errors(fig1):
    with pytest.raises(DimensionMismatch):
        compute_metrics(np.zeros((2, 2)), fig1)
    with pytest.raises(MalformedInput):
        compute_metrics(np.zeros((5, 5)), fig1)
    assert assignment_problems(np.eye(5) * 2, fig1)


def test_dominates_flags(fig1, fig1_uniform, fig1_plra):
    flags = dominates(compute_metrics(fig1_uniform, fig1), compute_metrics(fig1_plra, fig1))
    assert all(flags.values())
    back = dominates(compute_metrics(fig1_plra, fig1), compute_metrics(fig1_uniform, fig1))
    assert not back["entropy"] and not back["support"]


def _row_inst(n):
    return ProblemInstance(np.ones((1, n)), 1, 1)


@settings(max_examples=60, deadline=None)
@given(arrays(float, st.integers(2, 8), elements=st.floats(0.01, 1)))
def test_uniform_row_is_most_random(raw):
    n = raw.size
    row = (raw / raw.sum())[None, :]
    uniform = np.full((1, n), 1 / n)
    inst = _row_inst(n)
    m, u = compute_metrics(row, inst), compute_metrics(uniform, inst)
    assert u.entropy >= m.entropy - 1e-12
    assert u.support >= m.support
    assert u.maxprob <= m.maxprob + 1e-12
    assert u.avgmaxp <= m.avgmaxp + 1e-12
    assert u.l2norm <= m.l2norm + 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.permutations(range(5)))
def test_permutation_equivariance(seed, perm):
    rng = np.random.default_rng(seed)
    S = rng.random((4, 5))
    x = rng.random((4, 5))
    x /= x.sum(axis=1, keepdims=True)
    inst = ProblemInstance(S, 1, 4)
    perm = list(perm)
    a = compute_metrics(x, inst).as_dict()
    b = compute_metrics(x[:, perm], ProblemInstance(S[:, perm], 1, 4)).as_dict()
    for k in a:
        assert a[k] == pytest.approx(b[k])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31))
def test_binary_assignment(seed):
    rng = np.random.default_rng(seed)
    n = 5
    X = np.eye(n)[rng.permutation(n)]
    inst = ProblemInstance(rng.random((n, n)), 1, 1)
    m = compute_metrics(X, inst)
    assert m.entropy == 0
    assert m.support == X.sum()


def test_entropy_ignores_zeros():
    assert entropy([0.0, 1.0]) == 0
    assert entropy([0.5, 0.5]) == pytest.approx(math.log(2))
