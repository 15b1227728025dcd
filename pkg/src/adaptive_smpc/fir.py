"""FIR plant representation.

Regressors are ordered channel by channel, newest sample first::

    phi = [u_1(t-1), ..., u_1(t-m), ..., u_nu(t-1), ..., u_nu(t-m)]

Every other module relies on this ordering.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class FirDims:
    n_u: int
    n_y: int
    m: int

    def __post_init__(self):
        for name in ("n_u", "n_y", "m"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")

    @property
    def n_phi(self) -> int:
        """Regressor length ``n_u * m``."""
        return self.n_u * self.m

    @property
    def n_params(self) -> int:
        """Length of the stacked coefficient vector ``n_y * n_u * m``."""
        return self.n_y * self.n_u * self.m


@dataclass(frozen=True)
class ShiftOperators:
    w_op: np.ndarray
    z_op: np.ndarray


def build_shift_operators(dims: FirDims) -> ShiftOperators:
    """Block-diagonal shift ``W`` and input-injection ``Z`` matrices.

    ``W`` stacks ``n_u`` copies of the m x m sub-diagonal shift and ``Z``
    stacks ``n_u`` copies of the unit column ``[1, 0, ..., 0]^T``, so that
    ``phi(k+1) = W phi(k) + Z u(k)``.
    """
    q = np.eye(dims.m, k=-1)
    z = np.zeros((dims.m, 1))
    z[0, 0] = 1.0
    eye = np.eye(dims.n_u)
    return ShiftOperators(np.kron(eye, q), np.kron(eye, z))


def _vec(x, size: int, name: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
    if arr.size != size:
        raise ValueError(f"{name} must have length {size}, got {arr.size}")
    return arr


def advance_regressor(phi, u, dims: FirDims | None = None) -> np.ndarray:
    """Shift each channel block right by one and insert ``u_i`` in front.

    ``dims`` is optional; without it the block length is inferred from
    ``len(phi) / len(u)``.
    """
    u = np.atleast_1d(np.asarray(u, dtype=float)).ravel()
    phi = np.atleast_1d(np.asarray(phi, dtype=float)).ravel()
    if dims is None:
        if u.size == 0 or phi.size % u.size:
            raise ValueError(f"regressor length {phi.size} is not a multiple of input length {u.size}")
        dims = FirDims(n_u=u.size, n_y=1, m=phi.size // u.size)
    phi = _vec(phi, dims.n_phi, "phi")
    u = _vec(u, dims.n_u, "u")
    blocks = phi.reshape(dims.n_u, dims.m)
    out = np.empty_like(blocks)
    out[:, 0] = u
    out[:, 1:] = blocks[:, :-1]
    return out.ravel()


def simulate_output(h, phi, w) -> np.ndarray:
    """Plant output ``H phi + w``."""
    h = np.atleast_2d(np.asarray(h, dtype=float))
    phi = _vec(phi, h.shape[1], "phi")
    w = _vec(w, h.shape[0], "w")
    return h @ phi + w


def steady_state_regressor(u, dims: FirDims) -> np.ndarray:
    """Fixed point of ``phi = W phi + Z u``: each channel block repeats ``u_i``."""
    u = _vec(u, dims.n_u, "u")
    return np.repeat(u, dims.m)


def prediction_maps(dims: FirDims, horizon: int) -> tuple[np.ndarray, np.ndarray]:
    """Affine maps of the predicted regressors in the stacked input sequence.

    Returns ``(offset, gain)`` with ``offset[j]`` of shape (n_phi, n_phi) and
    ``gain[j]`` of shape (n_phi, horizon * n_u) such that
    ``phi(t+j+1 | t) = offset[j] @ phi(t) + gain[j] @ U``.
    """
    ops = build_shift_operators(dims)
    n_phi, n_u = dims.n_phi, dims.n_u
    offset = np.zeros((horizon, n_phi, n_phi))
    gain = np.zeros((horizon, n_phi, horizon * n_u))
    w_pow = np.eye(n_phi)
    prev_gain = np.zeros((n_phi, horizon * n_u))
    for j in range(horizon):
        w_pow = ops.w_op @ w_pow
        offset[j] = w_pow
        g = ops.w_op @ prev_gain
        g[:, j * n_u:(j + 1) * n_u] += ops.z_op
        gain[j] = g
        prev_gain = g
    return offset, gain
