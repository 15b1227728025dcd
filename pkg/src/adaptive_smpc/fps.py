"""Set-membership tracking of the feasible parameter set (FPS).

Each output row ``h_j`` of the coefficient matrix is constrained only by its
own measurement cuts, so the set is stored as a product of ``n_y`` polytopes
in R^(n_u m).
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import polytope as poly
from .fir import FirDims
from .polytope import HPolytope

logger = logging.getLogger(__name__)

DEFAULT_MAX_ROWS = 200


class ModelInconsistencyError(poly.EmptyPolytopeError):
    """Measurement cuts left no model consistent with the data."""


@dataclass(frozen=True)
class FpsInitSpec:
    magnitude: float = 10.0
    decay: float = 1.0

    def __post_init__(self):
        if not self.magnitude > 0:
            raise ValueError(f"magnitude must be > 0, got {self.magnitude}")
        if not 0 < self.decay <= 1:
            raise ValueError(f"decay must lie in (0, 1], got {self.decay}")


@dataclass(frozen=True, eq=False)
class FeasibleParamSet:
    rows: tuple
    w_bar: np.ndarray
    _vertices: Optional[tuple] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        w_bar = np.atleast_1d(np.array(self.w_bar, dtype=float)).ravel()
        if w_bar.size != len(self.rows):
            raise ValueError(f"{len(self.rows)} row polytopes but {w_bar.size} disturbance bounds")
        if np.any(w_bar <= 0):
            raise ValueError("disturbance bounds must be > 0")
        w_bar.setflags(write=False)
        object.__setattr__(self, "rows", tuple(self.rows))
        object.__setattr__(self, "w_bar", w_bar)

    @property
    def n_y(self) -> int:
        return len(self.rows)

    @property
    def dim(self) -> int:
        return self.rows[0].dim

    def row_vertices(self) -> tuple:
        """Vertex arrays of every row polytope (cached)."""
        if self._vertices is None:
            verts = tuple(poly.enumerate_vertices(r, check_bounded=False) for r in self.rows)
            object.__setattr__(self, "_vertices", verts)
        return self._vertices

    @property
    def row_counts(self) -> list[int]:
        return [r.n_rows for r in self.rows]


def init_fps(spec: FpsInitSpec, dims: FirDims, w_bar) -> FeasibleParamSet:
    """Box ``|h_{j,(i,k)}| <= L rho^(k-1)`` for every output, channel and lag."""
    lag_bounds = spec.magnitude * spec.decay ** np.arange(dims.m)
    bound = np.tile(lag_bounds, dims.n_u)
    row = HPolytope.box(-bound, bound)
    return FeasibleParamSet(tuple(row for _ in range(dims.n_y)), w_bar)


def update_fps(fps: FeasibleParamSet, phi, y, *, method: str = "vertex",
               max_rows: int = DEFAULT_MAX_ROWS, tol: float = poly.FEAS_TOL) -> FeasibleParamSet:
    """Intersect with the two measurement cuts per output and prune redundant rows.

    Raises
    ------
    ModelInconsistencyError
        When the cut leaves an empty set (the disturbance bound was violated
        or the true model was never in the set).
    """
    phi = np.atleast_1d(np.asarray(phi, dtype=float)).ravel()
    y = np.atleast_1d(np.asarray(y, dtype=float)).ravel()
    if phi.size != fps.dim or y.size != fps.n_y:
        raise ValueError(f"expected phi of length {fps.dim} and y of length {fps.n_y}")
    informative = bool(np.any(phi))
    new_rows, new_verts = [], []
    for j, row in enumerate(fps.rows):
        wb = fps.w_bar[j]
        if not informative:
            if abs(y[j]) > wb + tol:
                raise ModelInconsistencyError(
                    f"zero regressor but |y_{j}|={abs(y[j]):.6g} exceeds bound {wb:.6g}")
            new_rows.append(row)
            new_verts.append(fps.row_vertices()[j])
            continue
        cut = poly.add_halfspace(row, phi, y[j] + wb)
        cut = poly.add_halfspace(cut, -phi, -y[j] + wb)
        try:
            verts = poly.enumerate_vertices(cut, tol, check_bounded=False)
            reduced = poly.remove_redundant(cut, tol, method=method, vertices=verts)
        except poly.EmptyPolytopeError as exc:
            raise ModelInconsistencyError(f"output row {j}: no model consistent with data") from exc
        if reduced.n_rows > max_rows:
            logger.warning("FPS row %d keeps %d irredundant rows (cap %d)", j, reduced.n_rows, max_rows)
        new_rows.append(reduced)
        new_verts.append(verts)
    return FeasibleParamSet(tuple(new_rows), fps.w_bar, tuple(new_verts))


def fps_vertices(fps: FeasibleParamSet) -> np.ndarray:
    """Model vertices as an (n_v, n_y, n_u m) array (Cartesian product over rows)."""
    per_row = fps.row_vertices()
    if fps.n_y == 1:
        return per_row[0][:, None, :].copy()
    out = [np.stack(combo) for combo in itertools.product(*per_row)]
    return np.asarray(out)


def fps_contains(fps: FeasibleParamSet, h, tol: float = poly.FEAS_TOL) -> bool:
    h = np.atleast_2d(np.asarray(h, dtype=float))
    return all(poly.contains(r, h[j], tol) for j, r in enumerate(fps.rows))


def fps_chebyshev_center(fps: FeasibleParamSet) -> np.ndarray:
    """Row-wise Chebyshev centers stacked into an n_y x (n_u m) matrix."""
    return np.vstack([poly.chebyshev_center(r)[0] for r in fps.rows])


def fps_volume(fps: FeasibleParamSet) -> float:
    """Product of the row polytopes' hull volumes."""
    vol = 1.0
    for verts in fps.row_vertices():
        vol *= poly.hull_volume(verts)
    return vol
