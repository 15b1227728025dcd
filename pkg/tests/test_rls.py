import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adaptive_smpc import polytope as poly
from adaptive_smpc import sim
from adaptive_smpc.fir import FirDims
from adaptive_smpc.fps import FeasibleParamSet
from adaptive_smpc.rls import (EstimatorError, ModelEstimate, build_block_regressor, mean_as_matrix,
                               matrix_as_mean, project_estimate, rls_update, weighting_matrix)
from adaptive_smpc.solvers import Status, solve_lp
from oracles import rls_batch


def test_block_regressor():
    np.testing.assert_array_equal(build_block_regressor([2, 2, 2], 1), [[2, 2, 2]])
    np.testing.assert_array_equal(build_block_regressor([1, 0], 2), [[1, 0, 0, 0], [0, 0, 1, 0]])
    assert not np.any(build_block_regressor(np.zeros(3), 2))


def test_scalar_update_by_hand():
    est = rls_update(ModelEstimate([0.0], [[1.0]], [[1.0]]), [[1.0]], [2.0])
    assert est.mean[0] == pytest.approx(1.0)
    assert est.covariance[0, 0] == pytest.approx(0.5)


def test_uninformative_updates():
    est = ModelEstimate([1.0, 2.0], np.eye(2), [[0.5]])
    same = rls_update(est, [[0.0, 0.0]], [9.0])
    np.testing.assert_array_equal(same.mean, est.mean)
    confident = ModelEstimate([1.0, 2.0], np.zeros((2, 2)), [[0.5]])
    np.testing.assert_array_equal(rls_update(confident, [[1.0, 1.0]], [9.0]).mean, [1.0, 2.0])


def test_singular_innovation():
    est = ModelEstimate([0.0], [[0.0]], [[0.0]])
    with pytest.raises(EstimatorError):
        rls_update(est, [[1.0]], [1.0])


def test_estimate_validation():
    with pytest.raises(ValueError):
        ModelEstimate([0.0, 1.0], np.eye(3), [[1.0]])
    with pytest.raises(ValueError):
        ModelEstimate([0.0, 1.0], [[1.0, 0.5], [0.0, 1.0]], [[1.0]])


def test_joseph_form_matches_standard():
    rng = np.random.default_rng(4)
    est = ModelEstimate(rng.normal(size=4), np.eye(4), np.eye(2) * 0.3)
    blk = build_block_regressor(rng.normal(size=2), 2)
    y = rng.normal(size=2)
    a = rls_update(est, blk, y)
    b = rls_update(est, blk, y, joseph=True)
    np.testing.assert_allclose(a.mean, b.mean, atol=1e-12)
    np.testing.assert_allclose(a.covariance, b.covariance, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 20), st.integers(1, 2))
def test_batch_equivalence(seed, n_steps, n_y):
    rng = np.random.default_rng(seed)
    n_phi = 3
    n = n_y * n_phi
    root = rng.normal(size=(n, n))
    cov0 = root @ root.T + 0.5 * np.eye(n)
    noise = np.diag(rng.uniform(0.1, 1.0, n_y))
    mean0 = rng.normal(size=n)
    regs = [build_block_regressor(rng.normal(size=n_phi), n_y) for _ in range(n_steps)]
    outs = [rng.normal(size=n_y) for _ in range(n_steps)]
    est = ModelEstimate(mean0, cov0, noise)
    for blk, y in zip(regs, outs):
        prior = est.covariance
        est = rls_update(est, blk, y)
        assert np.min(np.linalg.eigvalsh(prior - est.covariance)) >= -1e-10
    mean_ref, cov_ref = rls_batch(mean0, cov0, noise, regs, outs)
    np.testing.assert_allclose(est.mean, mean_ref, atol=1e-8, rtol=0)
    np.testing.assert_allclose(est.covariance, cov_ref, atol=1e-8, rtol=0)


def _fps(*rows):
    return FeasibleParamSet(rows, np.ones(len(rows)))


def test_projection_examples():
    box = poly.HPolytope.box([-1, -1], [1, 1])
    est = ModelEstimate([0.2, -0.3], np.eye(2), [[1.0]])
    np.testing.assert_array_equal(project_estimate(est, _fps(box)), [0.2, -0.3])
    est = ModelEstimate([2.0, 0.5], np.eye(2), [[1.0]])
    np.testing.assert_allclose(project_estimate(est, _fps(box)), [1.0, 0.5], atol=1e-7)
    half_line = poly.HPolytope([[1.0], [-1.0]], [0.0, 10.0])
    est = ModelEstimate([1.0], [[1.0]], [[1.0]])
    np.testing.assert_allclose(project_estimate(est, _fps(half_line)), [0.0], atol=1e-7)


def test_weighting_regularized_when_singular():
    m = weighting_matrix(np.diag([1.0, 1e-14]))
    assert np.all(np.isfinite(m))
    assert np.min(np.linalg.eigvalsh(m)) > 0


@pytest.mark.parametrize("seed", range(10))
def test_projection_kkt(seed):
    """M (x - mu) = -A_act^T lam with lam >= 0 has a solution at the projection."""
    rng = np.random.default_rng(seed)
    normals = rng.normal(size=(7, 3))
    p = poly.HPolytope(normals, rng.uniform(0.5, 1.0, 7))
    p = poly.HPolytope(np.vstack([p.a_mat, np.eye(3), -np.eye(3)]), np.concatenate([p.b_vec, np.full(6, 2.0)]))
    root = rng.normal(size=(3, 3))
    cov = root @ root.T + 0.2 * np.eye(3)
    est = ModelEstimate(rng.normal(scale=3.0, size=3), cov, [[1.0]])
    x = project_estimate(est, _fps(p))
    assert poly.contains(p, x, 1e-6)
    grad = weighting_matrix(cov) @ (x - est.mean)
    active = np.abs(p.a_mat @ x - p.b_vec) <= 1e-6
    if not np.any(active):
        np.testing.assert_allclose(grad, 0.0, atol=1e-6)
        return
    a_act = p.a_mat[active]
    k = a_act.shape[0]
    scale = max(1.0, np.max(np.abs(grad)))
    # find lam >= 0 with |A^T lam + grad| <= slack, minimize slack
    cost = np.append(np.zeros(k), 1.0)
    rows = np.vstack([np.hstack([a_act.T, -np.ones((3, 1))]), np.hstack([-a_act.T, -np.ones((3, 1))]),
                      np.hstack([-np.eye(k), np.zeros((k, 1))])])
    rhs = np.concatenate([-grad, grad, np.zeros(k)])
    res = solve_lp(cost, rows, rhs)
    assert res.status is Status.OPTIMAL
    assert res.objective <= 1e-5 * scale


def test_mean_matrix_round_trip():
    dims = FirDims(1, 2, 2)
    h = mean_as_matrix([1, 2, 3, 4], dims)
    np.testing.assert_array_equal(h, [[1, 2], [3, 4]])
    np.testing.assert_array_equal(matrix_as_mean(h), [1, 2, 3, 4])
    np.testing.assert_array_equal(mean_as_matrix([1, 2, 3], FirDims(1, 1, 3)), [[1, 2, 3]])
    with pytest.raises(ValueError):
        mean_as_matrix([1, 2, 3], dims)


def test_error_shrinks_under_exciting_inputs(benchmark):
    h_true = benchmark.true_model.ravel()
    start = np.linalg.norm(np.asarray(benchmark.estimator.mean0) - h_true)
    better = 0
    n = 100
    for seed in range(n):
        trace = sim.run_estimation(benchmark, seed)
        better += np.linalg.norm(trace.block("mu")[-1] - h_true) < start
    assert better >= 0.95 * n
