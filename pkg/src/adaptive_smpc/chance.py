"""Distributionally robust tightening of the scalar output chance constraint.

``P{E y <= p} >= 1 - eps`` holds for every disturbance law with the given
mean and variance when, for every model vertex ``f``,

    kappa * sqrt(phibar^T Gamma phibar) + E f phi - p <= 0,

with ``kappa = sqrt((1 - eps) / eps)`` and ``phibar = [phi; 1; 1]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fir import FirDims


def kappa_of(epsilon: float) -> float:
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    return math.sqrt((1.0 - epsilon) / epsilon)


@dataclass(frozen=True, eq=False)
class ChanceSpec:
    e_row: np.ndarray
    p: float
    epsilon: float

    def __post_init__(self):
        e_row = np.atleast_1d(np.array(self.e_row, dtype=float)).ravel()
        e_row.setflags(write=False)
        object.__setattr__(self, "e_row", e_row)
        object.__setattr__(self, "p", float(self.p))
        kappa_of(self.epsilon)

    @property
    def kappa(self) -> float:
        return kappa_of(self.epsilon)


def build_gamma(spec: ChanceSpec, sigma_w2, dims: FirDims) -> np.ndarray:
    """Appended covariance ``diag(0_{n_u m}, E sigma_w^2 E^T, 0)``."""
    sigma_w2 = np.atleast_2d(np.asarray(sigma_w2, dtype=float))
    if sigma_w2.shape != (spec.e_row.size, spec.e_row.size):
        raise ValueError(f"sigma_w2 must be {spec.e_row.size} x {spec.e_row.size}")
    n = dims.n_phi
    gamma = np.zeros((n + 2, n + 2))
    gamma[n, n] = float(spec.e_row @ sigma_w2 @ spec.e_row)
    return gamma


def appended_regressor(phi) -> np.ndarray:
    phi = np.atleast_1d(np.asarray(phi, dtype=float)).ravel()
    return np.concatenate([phi, [1.0, 1.0]])


def constant_tightening(gamma, spec: ChanceSpec) -> float | None:
    """``kappa sqrt(phibar^T Gamma phibar)`` when it does not depend on phi.

    That is the case whenever Gamma is zero outside the two trailing constant
    slots; returns None otherwise.
    """
    gamma = np.asarray(gamma, dtype=float)
    n = gamma.shape[0] - 2
    if np.any(gamma[:n, :]) or np.any(gamma[:, :n]):
        return None
    tail = gamma[n:, n:]
    return spec.kappa * math.sqrt(max(float(np.ones(2) @ tail @ np.ones(2)), 0.0))


def gamma_sqrt(gamma) -> np.ndarray:
    """Symmetric PSD square root ``L`` with ``L^T L = Gamma``."""
    gamma = 0.5 * (np.asarray(gamma, dtype=float) + np.asarray(gamma, dtype=float).T)
    vals, vecs = np.linalg.eigh(gamma)
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def cone_row_residual(phi, gamma, spec: ChanceSpec, vertex) -> float:
    """Left-hand side of the tightened row; the row holds iff the result <= 0."""
    phibar = appended_regressor(phi)
    vertex = np.atleast_2d(np.asarray(vertex, dtype=float))
    quad = float(phibar @ np.asarray(gamma, dtype=float) @ phibar)
    return spec.kappa * math.sqrt(max(quad, 0.0)) + float(spec.e_row @ vertex @ phibar[:-2]) - spec.p
