import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from randmatch import (
    BlockwiseSpec,
    ProblemInstance,
    RandomDiscreteSpec,
    check_feasibility,
    generate_blockwise,
    generate_random_discrete,
    validate_instance,
)
from randmatch.errors import InvalidSpec


def test_fig1_is_valid(fig1):
    assert validate_instance(fig1).ok
    assert fig1.S.shape == (5, 5)
    assert fig1.total_similarity == 13


def test_load_infeasible_reported():
    rep = validate_instance(ProblemInstance(np.ones((4, 2)), 1, 1))
    assert not rep.ok
    assert "load infeasible" in rep


def test_negative_similarity_reported():
    rep = validate_instance(ProblemInstance([[1.0, -0.1], [0.0, 1.0]], 1, 1))
    assert "negative similarity" in rep


def test_require_valid_raises():
    with pytest.raises(InvalidSpec):
        ProblemInstance(np.ones((4, 2)), 1, 1).require_valid()


def test_instance_is_immutable(fig1):
    with pytest.raises(ValueError):
        fig1.S[0, 0] = 3


def test_feasibility_fig1(fig1):
    assert check_feasibility(fig1, "1/2")
    assert not check_feasibility(fig1, "1/6")
    assert check_feasibility(fig1, 1)


def test_blockwise_fig1(fig1):
    inst = generate_blockwise(BlockwiseSpec(np.eye(2), (3, 2), (3, 2)), 1, 1)
    assert inst == fig1


def test_blockwise_single_block():
    inst = generate_blockwise(BlockwiseSpec([[1.0]], (4,), (4,)), 1, 1)
    assert np.array_equal(inst.S, np.ones((4, 4)))


def test_blockwise_two_by_two_example():
    spec = BlockwiseSpec([[2, 1], [1, 3]], (2, 2), (2, 2))
    inst = generate_blockwise(spec, 1, 1)
    assert inst.S.tolist() == [[2, 2, 1, 1], [2, 2, 1, 1], [1, 1, 3, 3], [1, 1, 3, 3]]
    assert spec.dominance() == 2
    assert BlockwiseSpec(np.eye(2), (1, 1), (1, 1)).dominance() == np.inf


def test_blockwise_rejects_non_dominant():
    with pytest.raises(InvalidSpec):
        generate_blockwise(BlockwiseSpec([[1, 1], [0, 1]], (1, 1), (1, 1)), 1, 1)


def test_random_discrete_single_level():
    inst = generate_random_discrete(1, 1, RandomDiscreteSpec((1.0,)))
    assert inst.S.tolist() == [[1.0]]


def test_random_discrete_deterministic():
    spec = RandomDiscreteSpec((0.25, 0.5, 1.0), seed=42)
    assert generate_random_discrete(3, 3, spec) == generate_random_discrete(3, 3, spec)


def test_random_discrete_level_frequencies():
    levels = (0.25, 0.5, 1.0)
    inst = generate_random_discrete(100, 100, RandomDiscreteSpec(levels, seed=7))
    n = inst.S.size
    p = 1 / 3
    sigma = np.sqrt(n * p * (1 - p))
    for v in levels:
        assert abs((inst.S == v).sum() - n * p) <= 3 * sigma


def test_random_discrete_rejects_bad_levels():
    with pytest.raises(InvalidSpec):
        RandomDiscreteSpec((0.5, 0.25))


@st.composite
def blockwise_specs(draw):
    k = draw(st.integers(1, 3))
    off = draw(st.lists(st.floats(0, 0.9), min_size=k * k, max_size=k * k))
    A = np.array(off).reshape(k, k)
    np.fill_diagonal(A, 1.0)
    sizes = st.lists(st.integers(1, 3), min_size=k, max_size=k)
    return BlockwiseSpec(A, tuple(draw(sizes)), tuple(draw(sizes)))


@settings(max_examples=40, deadline=None)
@given(blockwise_specs())
def test_blockwise_structure(spec):
    inst = generate_blockwise(spec, 1, max(spec.paper_sizes) * spec.k)
    pb, rb = spec.paper_blocks(), spec.reviewer_blocks()
    for p in range(inst.n_p):
        for r in range(inst.n_r):
            assert inst.S[p, r] == spec.A[pb[p], rb[r]]
    assert validate_instance(inst).ok


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**31))
def test_feasibility_monotone_in_cap(n_p, n_r, seed):
    inst = generate_random_discrete(n_p, n_r, RandomDiscreteSpec((1.0,), seed), 1, -(-n_p // n_r))
    caps = [f"{k}/12" for k in range(1, 13)]
    flags = [check_feasibility(inst, q) for q in caps]
    assert flags[-1]
    first = flags.index(True)
    assert all(flags[first:])
