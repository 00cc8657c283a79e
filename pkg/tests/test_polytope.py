import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bangreg.errors import PolytopeError
from bangreg.polytope import (
    inclusion_defect,
    make_box,
    make_simplex,
    min_normal_shift,
    polytope_from_dict,
    support_argmin,
)


def _dirset(U):
    return {tuple(np.round(e, 12)) for e in U.edge_dirs}


def test_unit_interval():
    U = make_box([0.0], [1.0])
    np.testing.assert_array_equal(U.vertices, [[0.0], [1.0]])
    assert _dirset(U) == {(1.0,), (-1.0,)}


def test_unit_square():
    U = make_box([0, 0], [1, 1])
    assert len(U.vertices) == 4
    assert _dirset(U) == {(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)}


def test_unit_cube_combinatorics():
    U = make_box([0] * 3, [1] * 3)
    assert (len(U.vertices), len(U.edges), len(U.edge_dirs)) == (8, 12, 6)


def test_triangle_edge_directions():
    U = make_simplex([[0, 0], [1, 0], [0, 1]])
    r = 1 / np.sqrt(2)
    want = {(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)}
    want |= {tuple(np.round([r, -r], 12)), tuple(np.round([-r, r], 12))}
    assert _dirset(U) == want


def test_segment_simplex_is_box():
    U = make_simplex([[0.0], [1.0]])
    assert U.is_box
    np.testing.assert_array_equal(U.vertices, make_box([0], [1]).vertices)


@pytest.mark.parametrize("bad", [
    lambda: make_simplex([[0, 0], [1, 0], [2, 0]]),
    lambda: make_box([1.0], [0.0]),
    lambda: make_box([0] * 13, [1] * 13),
    lambda: polytope_from_dict({"ball": 1}),
])
def test_invalid_sets(bad):
    with pytest.raises(PolytopeError):
        bad()


@pytest.mark.parametrize("c,lo,hi,vertex,tie", [
    ([0.5], [0], [1], [0.0], False),
    ([0.0], [0], [1], None, True),
    ([-1.0, 2.0], [0, 0], [1, 1], [1.0, 0.0], False),
])
def test_support_argmin(c, lo, hi, vertex, tie):
    v, t = support_argmin(c, make_box(lo, hi))
    assert t == tie
    if vertex is not None:
        np.testing.assert_array_equal(v, vertex)


@pytest.mark.parametrize("u,sigma,rho", [
    ([0.0], [0.7], [0.0]),
    ([1.0], [0.7], [0.7]),
    ([1.0], [-0.3], [0.0]),
])
def test_min_normal_shift_interval(u, sigma, rho):
    np.testing.assert_allclose(min_normal_shift(sigma, u, make_box([0], [1])), rho)


def test_round_trip_dict():
    U = make_simplex([[0, 0], [1, 0], [0, 1]])
    V = polytope_from_dict(U.to_dict())
    np.testing.assert_array_equal(U.vertices, V.vertices)


def test_edge_directions_closed_under_negation():
    U = make_simplex([[0, 0, 0], [1, 0, 0], [0, 2, 0], [0, 0, 1]])
    for e in U.edge_dirs:
        assert np.isclose(np.linalg.norm(e), 1.0, atol=1e-12)
        assert any(np.allclose(-e, d, atol=1e-12) for d in U.edge_dirs)


SETS = [make_box([0, 0], [1, 1]), make_simplex([[0, 0], [1, 0], [0, 1]]), make_simplex([[0, 0], [2, 1], [-1, 3]])]


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2), st.integers(0, 3),
       st.lists(st.floats(-5, 5, allow_nan=False), min_size=2, max_size=2))
def test_shift_makes_inclusion_hold_and_is_minimal(k, vi, sigma):
    U = SETS[k]
    u = U.vertices[vi % len(U.vertices)]
    sigma = np.asarray(sigma)
    rho = min_normal_shift(sigma, u, U)
    assert inclusion_defect(sigma - rho, u, U) <= 1e-9
    # rho = 0 whenever the inclusion already holds
    if inclusion_defect(sigma, u, U) == 0.0:
        np.testing.assert_allclose(rho, 0.0, atol=1e-12)
    # no smaller shift along the segment towards zero works
    if np.linalg.norm(rho) > 1e-9:
        assert inclusion_defect(sigma - 0.99 * rho, u, U) > 0.0


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2), st.lists(st.floats(-5, 5, allow_nan=False), min_size=2, max_size=2))
def test_argmin_attains_minimum(k, c):
    U = SETS[k]
    v, _ = support_argmin(c, U)
    assert np.dot(c, v) <= (U.vertices @ np.asarray(c)).min() + 1e-12
