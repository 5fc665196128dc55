import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from burstalign.image_core import DimensionError, ParameterError
from burstalign.matching import (
    EPS_D,
    CandidateSet,
    hard_argmin,
    nma_distances,
    soft_match,
    soft_weights,
    soft_weights_jacobian,
)

distance_vectors = arrays(np.float64, st.integers(1, 16), elements=st.floats(0, 1))


def _set(ref, cands):
    cands = np.asarray(cands, dtype=float)
    return CandidateSet(ref, cands, np.zeros((len(cands), 2), dtype=int))


def test_identical_candidate_has_zero_distance():
    rng = np.random.default_rng(0)
    ref = rng.random((4, 4))
    d = nma_distances(_set(ref, [ref + 0.3, ref, rng.random((4, 4))]))
    assert d[1] == 0.0


def test_equal_mads_give_symmetric_distances():
    ref = np.zeros((3, 3))
    d = nma_distances(_set(ref, [ref + 0.2, ref - 0.2]))
    np.testing.assert_allclose(d, [1 / math.sqrt(2)] * 2, rtol=1e-12)


def test_nma_matches_straight_line_formula():
    rng = np.random.default_rng(1)
    ref = rng.random((5, 5))
    cands = rng.random((4, 5, 5))
    mads = [sum(abs(c[i, j] - ref[i, j]) for i in range(5) for j in range(5)) / 25 for c in cands]
    norm = math.sqrt(sum(m * m for m in mads) + EPS_D**2)
    np.testing.assert_allclose(nma_distances(_set(ref, cands)), [m / norm for m in mads], rtol=1e-13)


def test_candidate_set_shape_checks():
    with pytest.raises(DimensionError):
        CandidateSet(np.zeros((4, 4)), np.zeros((2, 3, 3)), np.zeros((2, 2)))
    with pytest.raises(DimensionError):
        CandidateSet(np.zeros((4, 4)), np.zeros((2, 4, 4)), np.zeros((3, 2)))


def test_soft_weights_examples():
    np.testing.assert_allclose(soft_weights(np.full(5, 0.4), 0.1), 0.2, rtol=1e-15)
    w = soft_weights(np.array([0.0, 1.0]), 1e-2)
    assert abs(w[0] - 1) < 1e-12
    d = np.array([0.2, 0.5, 0.9])
    e = [math.exp(-x) for x in d]
    np.testing.assert_allclose(soft_weights(d, 1.0), [x / sum(e) for x in e], rtol=0, atol=1e-14)


@pytest.mark.parametrize("T", [0.0, -1e-3])
def test_soft_weights_rejects_nonpositive_temperature(T):
    with pytest.raises(ParameterError):
        soft_weights(np.zeros(3), T)


@given(distance_vectors, st.sampled_from([1.0, 1e-2, 1e-3]))
def test_soft_weights_are_a_distribution(d, T):
    w = soft_weights(d, T)
    assert np.all(w >= 0) and abs(w.sum() - 1) < 1e-12


def test_jacobian_two_point_uniform():
    np.testing.assert_allclose(soft_weights_jacobian(np.zeros(2), 1.0), [[-0.25, 0.25], [0.25, -0.25]], rtol=1e-15)


@given(distance_vectors, st.sampled_from([1.0, 1e-2, 1e-3]))
def test_jacobian_rows_sum_to_zero(d, T):
    J = soft_weights_jacobian(d, T)
    # zero up to the rounding of a differently ordered sum
    scale = np.abs(J).sum(axis=1)
    assert np.all(np.abs(J.sum(axis=1)) <= 4 * np.finfo(float).eps * scale)


def test_jacobian_matches_finite_differences():
    rng = np.random.default_rng(2)
    T, h = 1e-2, 1e-6
    for _ in range(20):
        d = rng.uniform(0, 0.05, size=int(rng.integers(2, 10)))
        J = soft_weights_jacobian(d, T)
        Jn = np.stack(
            [(soft_weights(d + h * e, T) - soft_weights(d - h * e, T)) / (2 * h) for e in np.eye(len(d))], axis=1
        )
        assert np.max(np.abs(J - Jn)) / np.max(np.abs(J)) < 1e-5


def test_soft_match_singleton():
    ref = np.zeros((3, 3))
    c = np.full((1, 3, 3), 0.4)
    m = soft_match(CandidateSet(ref, c, [[2, 3]]), 1e-2)
    np.testing.assert_array_equal(m.weights, [1.0])
    np.testing.assert_array_equal(m.blended_patch, c[0])
    np.testing.assert_array_equal(m.expected_offset, [2, 3])


def test_soft_match_duplicate_dominates_at_low_temperature():
    rng = np.random.default_rng(3)
    ref = rng.random((8, 8))
    cands = np.stack([rng.random((8, 8)), ref.copy(), rng.random((8, 8))])
    m = soft_match(CandidateSet(ref, cands, np.arange(6).reshape(3, 2)), 1e-3)
    assert np.max(np.abs(m.blended_patch - ref)) < 1e-6


def test_soft_match_identical_candidates_smooth():
    ref = np.zeros((4, 4))
    common = np.random.default_rng(4).random((4, 4))
    m = soft_match(CandidateSet(ref, np.stack([common] * 3), np.zeros((3, 2))), 10.0)
    np.testing.assert_allclose(m.blended_patch, common, rtol=1e-15)


def test_hard_argmin_examples():
    assert hard_argmin(np.array([0.3, 0.1, 0.2])) == 1
    assert hard_argmin(np.array([0.1, 0.1]), np.array([[2, 0], [0, 1]])) == 1
    # equal magnitude: raster order wins
    assert hard_argmin(np.zeros(4), np.array([[0, 1], [1, 0], [0, -1], [-1, 0]])) == 3
    # tie-break measured from the search centre
    assert hard_argmin(np.zeros(2), np.array([[5, 5], [9, 9]]), center=np.array([8, 8])) == 1


def _resolvable_minimum(d):
    s = np.sort(d)
    return s[1] - s[0] > 1e-9


@given(arrays(np.float64, st.integers(2, 16), elements=st.floats(0, 1)).filter(_resolvable_minimum))
def test_argmax_of_weights_is_hard_argmin(d):
    for T in (1e-1, 1e-2, 1e-3):
        assert int(np.argmax(soft_weights(d, T))) == hard_argmin(d)
