import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from kgalign.matching import MatchPair, best_match, csls_adjust, hungarian_assign, reciprocity_filter
from kgalign.simmat import SimilarityMatrix

small_matrices = st.tuples(st.integers(1, 8), st.integers(1, 8)).flatmap(
    lambda s: arrays(np.float64, s, elements=st.integers(-3, 3).map(float))
)


def test_csls_identity():
    np.testing.assert_array_equal(csls_adjust(np.eye(2), 1), [[0.0, -2.0], [-2.0, 0.0]])


def test_csls_constant():
    assert not csls_adjust(np.full((3, 4), 0.7), 2).any()


@pytest.mark.parametrize("k", [1, 2, 3])
def test_csls_vs_brute_force(k):
    rng = np.random.default_rng(k)
    S = rng.normal(size=(9, 6))
    np.testing.assert_allclose(csls_adjust(S, k), oracles.csls(S, k), atol=1e-12)


def test_csls_keeps_ids():
    sm = SimilarityMatrix(np.eye(2), ("a", "b"), ("x", "y"), "factual")
    out = csls_adjust(sm, 1)
    assert isinstance(out, SimilarityMatrix) and out.row_ids == ("a", "b") and out.provenance == "factual"


def test_csls_bad_k():
    with pytest.raises(ValueError):
        csls_adjust(np.eye(2), 3)
    with pytest.raises(ValueError):
        csls_adjust(np.eye(2), 0)


def test_csls_preserves_row_argmax_when_column_hubs_are_flat():
    rng = np.random.default_rng(0)
    for _ in range(50):
        S = rng.normal(size=(5, 5))
        # make every column's top-2 mean equal by appending two shared maxima rows
        S = np.vstack([S, np.full((2, 5), 10.0)])
        adj = csls_adjust(S, 2)
        np.testing.assert_array_equal(np.argmax(adj[:5], axis=1), np.argmax(S[:5], axis=1))


def test_reciprocity_examples():
    assert reciprocity_filter(np.eye(4)) == [MatchPair(i, i, "reciprocal") for i in range(4)]
    out = reciprocity_filter(np.array([[0.9, 0.8], [0.95, 0.1]]))
    assert [(p.e1, p.e2) for p in out] == [(1, 0)]


@settings(max_examples=200, deadline=None)
@given(small_matrices)
def test_reciprocity_vs_brute_force(S):
    got = [(p.e1, p.e2) for p in reciprocity_filter(S)]
    assert got == oracles.reciprocal_pairs(S)
    assert len({a for a, _ in got}) == len(got) == len({b for _, b in got})


def test_best_match_examples():
    res = best_match(np.array([[0.1, 0.9, 0.5]]))
    assert res.rankings[0] == [1, 2, 0] and res.assignment[0] == 1
    assert best_match(np.array([[0.1, 0.9, 0.5]]), exclude_e2=[1]).assignment[0] == 2


def test_best_match_allows_many_to_one():
    res = best_match(np.array([[1.0, 0.0], [0.9, 0.1]]))
    assert res.assignment == {0: 0, 1: 0}


def test_best_match_vs_sort_oracle():
    rng = np.random.default_rng(4)
    S = rng.integers(0, 5, size=(10, 10)).astype(float)  # plenty of ties
    res = best_match(S)
    for i in range(10):
        ref = sorted(range(10), key=lambda j: -S[i, j])  # Python sort is stable
        assert res.rankings[i] == ref


def test_best_match_top_k():
    res = best_match(np.arange(12.0).reshape(3, 4), top_k=2)
    assert all(len(r) == 2 for r in res.rankings.values())
    assert res.assignment[0] == 3


def test_hungarian_identity():
    pairs, total = hungarian_assign(np.eye(5))
    assert sorted(pairs) == [(i, i) for i in range(5)] and total == 5.0


@pytest.mark.parametrize("shape", [(3, 3), (4, 6), (6, 4), (7, 7)])
def test_hungarian_vs_permutations(shape):
    rng = np.random.default_rng(sum(shape))
    for _ in range(5):
        S = rng.normal(size=shape)
        _, total = hungarian_assign(S)
        assert total == pytest.approx(oracles.best_assignment_total(S), abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(small_matrices)
def test_greedy_never_beats_optimal_one_to_one(S):
    pairs, total = hungarian_assign(S)
    assert len({a for a, _ in pairs}) == len(pairs) == min(S.shape)
    # greedy one-to-one: repeatedly take the best remaining cell
    left = S.copy()
    greedy = 0.0
    for _ in range(min(S.shape)):
        i, j = np.unravel_index(np.argmax(left), left.shape)
        greedy += S[i, j]
        left[i, :] = -np.inf
        left[:, j] = -np.inf
    assert greedy <= total + 1e-9
