"""Recursive least-squares estimate of the stacked FIR coefficients.

The coefficient matrix ``H`` (n_y x n_u m) is vectorized row by row,
``vec(H) = [H_1, ..., H_ny]^T``, and a measurement reads
``y = blkdiag(phi^T, ..., phi^T) vec(H) + w``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fir import FirDims
from .fps import FeasibleParamSet
from .polytope import contains
from .solvers import Status, solve_qp

COND_LIMIT = 1e12
COND_REG = 1e-10


class EstimatorError(ArithmeticError):
    pass


@dataclass(frozen=True, eq=False)
class ModelEstimate:
    mean: np.ndarray
    covariance: np.ndarray
    noise_var: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.array(self.mean, dtype=float)).ravel()
        cov = np.atleast_2d(np.array(self.covariance, dtype=float))
        noise = np.atleast_2d(np.array(self.noise_var, dtype=float))
        if cov.shape != (mean.size, mean.size):
            raise ValueError(f"covariance shape {cov.shape} does not match mean length {mean.size}")
        if noise.shape[0] != noise.shape[1]:
            raise ValueError("noise_var must be square")
        if not np.allclose(cov, cov.T, atol=1e-10) or not np.allclose(noise, noise.T, atol=1e-12):
            raise ValueError("covariances must be symmetric")
        for arr in (mean, cov, noise):
            arr.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)
        object.__setattr__(self, "noise_var", noise)


def build_block_regressor(phi, n_y: int) -> np.ndarray:
    """``blkdiag(phi^T, ..., phi^T)``, shape (n_y, n_y * len(phi))."""
    phi = np.atleast_1d(np.asarray(phi, dtype=float)).ravel()
    return np.kron(np.eye(n_y), phi[None, :])


def rls_update(est: ModelEstimate, phi_blk, y, *, joseph: bool = False) -> ModelEstimate:
    """One minimum-variance measurement update.

    ``K = S Phi^T (Phi S Phi^T + R)^-1``, ``mean += K (y - Phi mean)``,
    ``S = (I - K Phi) S`` (or the Joseph form when ``joseph`` is set).
    """
    phi_blk = np.atleast_2d(np.asarray(phi_blk, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float)).ravel()
    cov, noise = est.covariance, est.noise_var
    if phi_blk.shape != (noise.shape[0], est.mean.size) or y.size != noise.shape[0]:
        raise ValueError(f"regressor {phi_blk.shape} / output {y.shape} inconsistent with estimate")
    innov = phi_blk @ cov @ phi_blk.T + noise
    try:
        gain = np.linalg.solve(innov.T, (cov @ phi_blk.T).T).T
    except np.linalg.LinAlgError as exc:
        raise EstimatorError("singular innovation covariance") from exc
    mean = est.mean + gain @ (y - phi_blk @ est.mean)
    ikh = np.eye(cov.shape[0]) - gain @ phi_blk
    if joseph:
        new_cov = ikh @ cov @ ikh.T + gain @ noise @ gain.T
    else:
        new_cov = ikh @ cov
    new_cov = 0.5 * (new_cov + new_cov.T)
    return ModelEstimate(mean, new_cov, noise)


def weighting_matrix(covariance) -> np.ndarray:
    """Inverse covariance, regularized when the condition number exceeds 1e12."""
    cov = np.asarray(covariance, dtype=float)
    if np.linalg.cond(cov) > COND_LIMIT:
        cov = cov + COND_REG * np.eye(cov.shape[0])
    m = np.linalg.inv(cov)
    return 0.5 * (m + m.T)


def project_estimate(est: ModelEstimate, fps: FeasibleParamSet, *,
                     tol: float = 1e-6) -> np.ndarray:
    """Closest point of the FPS to the mean in the inverse-covariance metric."""
    dims_phi = fps.dim
    n_y = fps.n_y
    mean = est.mean
    if mean.size != n_y * dims_phi:
        raise ValueError("estimate length does not match the FPS")
    blocks = mean.reshape(n_y, dims_phi)
    if all(contains(r, blocks[j], tol=0.0) for j, r in enumerate(fps.rows)):
        return mean.copy()
    weight = weighting_matrix(est.covariance)
    # argmin is invariant to positive scaling; normalize for conditioning
    weight = weight / np.max(np.abs(weight))
    g_rows, h_rows = [], []
    for j, r in enumerate(fps.rows):
        g = np.zeros((r.n_rows, mean.size))
        g[:, j * dims_phi:(j + 1) * dims_phi] = r.a_mat
        g_rows.append(g)
        h_rows.append(r.b_vec)
    report = solve_qp(2.0 * weight, -2.0 * weight @ mean, np.vstack(g_rows), np.concatenate(h_rows))
    if report.status is not Status.OPTIMAL:
        raise EstimatorError(f"projection QP returned {report.status.value}")
    return report.x


def mean_as_matrix(mean, dims: FirDims) -> np.ndarray:
    mean = np.atleast_1d(np.asarray(mean, dtype=float)).ravel()
    if mean.size != dims.n_params:
        raise ValueError(f"expected {dims.n_params} coefficients, got {mean.size}")
    return mean.reshape(dims.n_y, dims.n_phi).copy()


def matrix_as_mean(h) -> np.ndarray:
    return np.atleast_2d(np.asarray(h, dtype=float)).ravel().copy()
