import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adaptive_smpc import polytope as poly
from adaptive_smpc.polytope import HPolytope
from oracles import (chebyshev_grid, facet_count_bruteforce, random_polytope, same_point_sets,
                     vertices_bruteforce)

SQUARE = HPolytope.box([0, 0], [1, 1])
TRIANGLE = HPolytope([[-1, 0], [0, -1], [1, 1]], [0, 0, 1])


def test_rejects_trivially_infeasible_row():
    with pytest.raises(poly.EmptyPolytopeError):
        HPolytope([[0.0, 0.0]], [-1.0])
    with pytest.raises(ValueError):
        HPolytope([[1.0, 0.0]], [1.0, 2.0])


def test_arrays_are_read_only():
    with pytest.raises(ValueError):
        SQUARE.a_mat[0, 0] = 5.0


def test_add_halfspace_axis_cut():
    cut = poly.add_halfspace(SQUARE, [1, 0], 0.5)
    assert cut.n_rows == 5 and SQUARE.n_rows == 4
    expected = np.array([[0, 0], [0.5, 0], [0.5, 1], [0, 1]], dtype=float)
    assert same_point_sets(poly.enumerate_vertices(cut), expected)


def test_add_halfspace_duplicate_and_redundant():
    dup = poly.add_halfspace(SQUARE, SQUARE.a_mat[0], SQUARE.b_vec[0])
    assert same_point_sets(poly.enumerate_vertices(dup), poly.enumerate_vertices(SQUARE))
    loose = poly.add_halfspace(TRIANGLE, [1, 1], 2)
    assert same_point_sets(poly.enumerate_vertices(loose), poly.enumerate_vertices(TRIANGLE))


def test_add_halfspace_zero_normal():
    with pytest.raises(ValueError):
        poly.add_halfspace(SQUARE, [0, 0], 1)


@pytest.mark.parametrize("method", ["lp", "vertex"])
def test_remove_redundant_examples(method):
    doubled = HPolytope(np.vstack([SQUARE.a_mat, SQUARE.a_mat]), np.concatenate([SQUARE.b_vec] * 2))
    assert poly.remove_redundant(doubled, method=method).n_rows == 4
    loose = poly.add_halfspace(TRIANGLE, [1, 1], 2)
    assert poly.remove_redundant(loose, method=method).n_rows == 3


def test_remove_redundant_empty():
    empty = HPolytope([[1.0], [-1.0]], [0.0, -1.0])
    with pytest.raises(poly.EmptyPolytopeError):
        poly.remove_redundant(empty)


def test_remove_redundant_unknown_method():
    with pytest.raises(ValueError):
        poly.remove_redundant(SQUARE, method="magic")


def test_enumerate_examples():
    expected = np.array([[0, 0], [1, 0], [0, 1], [1, 1]], dtype=float)
    assert same_point_sets(poly.enumerate_vertices(SQUARE), expected)
    simplex = HPolytope(np.vstack([-np.eye(3), np.ones((1, 3))]), [0, 0, 0, 1])
    expected = np.vstack([np.zeros(3), np.eye(3)])
    assert same_point_sets(poly.enumerate_vertices(simplex), expected)


def test_enumerate_errors():
    half_plane = HPolytope([[1.0, 0.0], [0.0, 1.0], [0.0, -1.0]], [1.0, 1.0, 1.0])
    with pytest.raises(poly.UnboundedPolytopeError):
        poly.enumerate_vertices(half_plane)
    empty = HPolytope.box([0, 0], [1, 1])
    empty = poly.add_halfspace(empty, [1, 1], -1)
    with pytest.raises(poly.EmptyPolytopeError):
        poly.enumerate_vertices(empty)
    with pytest.raises(poly.PolytopeError):
        poly.enumerate_vertices(HPolytope.box(-np.ones(7), np.ones(7)))


def test_is_bounded():
    assert poly.is_bounded(SQUARE)
    assert not poly.is_bounded(HPolytope([[1.0, 0.0], [0.0, 1.0]], [1.0, 1.0]))


def test_chebyshev_examples():
    c, r = poly.chebyshev_center(SQUARE)
    np.testing.assert_allclose(c, [0.5, 0.5], atol=1e-9)
    assert r == pytest.approx(0.5)
    _, r = poly.chebyshev_center(HPolytope.box([-1, -2], [1, 2]))
    assert r == pytest.approx(1.0)


def test_chebyshev_triangle_against_grid():
    c, r = poly.chebyshev_center(TRIANGLE)
    k = (2 - np.sqrt(2)) / 2
    np.testing.assert_allclose(c, [k, k], atol=1e-9)
    assert r == pytest.approx(k)
    gc, gr = chebyshev_grid(TRIANGLE.a_mat, TRIANGLE.b_vec)
    assert abs(gr - r) <= 1e-3
    np.testing.assert_allclose(gc, c, atol=1e-3)


def test_chebyshev_ball_inside():
    rng = np.random.default_rng(3)
    a, b = random_polytope(rng, 3, 10)
    p = HPolytope(a, b)
    c, r = poly.chebyshev_center(p)
    dirs = rng.normal(size=(1000, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    assert all(poly.contains(p, c + r * u, 1e-6) for u in dirs)


def test_contains_examples():
    assert poly.contains(SQUARE, [0.5, 0.5])
    assert not poly.contains(SQUARE, [1.0001, 0.5], tol=1e-6)
    assert poly.contains(SQUARE, [1 + 1e-9, 0.5], tol=1e-6)


@pytest.mark.parametrize("seed", range(20))
def test_enumeration_matches_combinatorial_oracle(seed):
    rng = np.random.default_rng(100 + seed)
    d = 2 + seed % 2
    a, b = random_polytope(rng, d, 6 if d == 3 else 10)
    verts = poly.enumerate_vertices(HPolytope(a, b))
    assert same_point_sets(verts, vertices_bruteforce(a, b))


@pytest.mark.parametrize("seed", range(10))
def test_redundancy_matches_facet_oracle(seed):
    rng = np.random.default_rng(200 + seed)
    a, b = random_polytope(rng, 2, 16)
    p = HPolytope(a, b)
    expected = facet_count_bruteforce(a, b)
    for method in ("lp", "vertex"):
        reduced = poly.remove_redundant(p, method=method)
        assert reduced.n_rows == expected
        assert same_point_sets(poly.enumerate_vertices(reduced), poly.enumerate_vertices(p))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([2, 3]))
def test_redundancy_preserves_point_set(seed, d):
    rng = np.random.default_rng(seed)
    a, b = random_polytope(rng, d, 8)
    p = HPolytope(a, b)
    raw = vertices_bruteforce(a, b)
    for method in ("lp", "vertex"):
        assert same_point_sets(poly.enumerate_vertices(poly.remove_redundant(p, method=method)), raw)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_vertices_satisfy_rows_and_are_distinct(seed):
    rng = np.random.default_rng(seed)
    a, b = random_polytope(rng, 3, 8)
    verts = poly.enumerate_vertices(HPolytope(a, b))
    assert np.all(verts @ a.T <= b + 1e-6)
    dists = np.linalg.norm(verts[:, None] - verts[None], axis=2) + np.eye(len(verts))
    assert np.min(dists) > 1e-8


def test_hull_volume():
    assert poly.hull_volume(poly.enumerate_vertices(HPolytope.box([0, 0, 0], [1, 2, 3]))) == pytest.approx(6)
    assert poly.hull_volume(np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]])) == 0.0
