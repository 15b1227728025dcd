"""Halfspace-representation polytopes ``{x : A x <= b}``.

Vertex enumeration is combinatorial (every d-subset of rows is solved and
filtered for feasibility), which is exact and cheap for the low dimensions
used here; dimensions above ``MAX_ENUM_DIM`` are refused.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations

import numpy as np

from .solvers import Status, solve_lp

logger = logging.getLogger(__name__)

FEAS_TOL = 1e-6
RANK_TOL = 1e-8
DET_TOL = 1e-10
MAX_ENUM_DIM = 6
_CHUNK = 20000


class PolytopeError(ValueError):
    pass


class EmptyPolytopeError(PolytopeError):
    pass


class UnboundedPolytopeError(PolytopeError):
    pass


@dataclass(frozen=True, eq=False)
class HPolytope:
    a_mat: np.ndarray
    b_vec: np.ndarray

    def __post_init__(self):
        a = np.atleast_2d(np.array(self.a_mat, dtype=float))
        b = np.atleast_1d(np.array(self.b_vec, dtype=float)).ravel()
        if a.ndim != 2 or a.shape[1] < 1:
            raise ValueError(f"a_mat must be k x d with d >= 1, got shape {a.shape}")
        if a.shape[0] != b.size:
            raise ValueError(f"{a.shape[0]} rows but {b.size} offsets")
        zero_rows = np.linalg.norm(a, axis=1) == 0
        if np.any(zero_rows & (b < 0)):
            raise EmptyPolytopeError("row 0 <= b with b < 0 is trivially infeasible")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "a_mat", a)
        object.__setattr__(self, "b_vec", b)

    @property
    def dim(self) -> int:
        return self.a_mat.shape[1]

    @property
    def n_rows(self) -> int:
        return self.a_mat.shape[0]

    @classmethod
    def box(cls, lower, upper) -> "HPolytope":
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        eye = np.eye(lower.size)
        return cls(np.vstack([eye, -eye]), np.concatenate([upper, -lower]))

    def __repr__(self):
        return f"HPolytope(dim={self.dim}, rows={self.n_rows})"


def _normalized(p: HPolytope) -> tuple[np.ndarray, np.ndarray]:
    norms = np.linalg.norm(p.a_mat, axis=1)
    keep = norms > 0
    return p.a_mat[keep] / norms[keep, None], p.b_vec[keep] / norms[keep]


def add_halfspace(p: HPolytope, a, b: float) -> HPolytope:
    """Return ``p`` with the extra row ``a^T x <= b`` appended."""
    a = np.atleast_1d(np.asarray(a, dtype=float)).ravel()
    if a.size != p.dim:
        raise ValueError(f"normal has length {a.size}, polytope dimension is {p.dim}")
    if not np.any(a):
        raise ValueError("zero normal vector")
    return HPolytope(np.vstack([p.a_mat, a]), np.append(p.b_vec, float(b)))


def contains(p: HPolytope, x, tol: float = FEAS_TOL) -> bool:
    x = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
    if x.size != p.dim:
        raise ValueError(f"point has length {x.size}, polytope dimension is {p.dim}")
    return bool(np.all(p.a_mat @ x <= p.b_vec + tol))


def is_bounded(p: HPolytope) -> bool:
    """True iff the row normals positively span R^d (no recession direction)."""
    a, _ = _normalized(p)
    d = p.dim
    if a.shape[0] <= d or np.linalg.matrix_rank(a, tol=RANK_TOL) < d:
        return False
    # exists lam >= 1 with A^T lam = 0
    k = a.shape[0]
    res = solve_lp(np.zeros(k), -np.eye(k), -np.ones(k), a.T, np.zeros(d))
    return res.status is Status.OPTIMAL


@lru_cache(maxsize=64)
def _combos(k: int, d: int) -> np.ndarray:
    return np.array(list(combinations(range(k), d)), dtype=np.intp).reshape(-1, d)


def _dedupe(points: np.ndarray, tol: float) -> np.ndarray:
    if len(points) == 0:
        return points
    order = np.lexsort(points.T[::-1])
    points = points[order]
    kept: list[np.ndarray] = []
    for pt in points:
        if kept:
            dist = np.linalg.norm(np.asarray(kept) - pt, axis=1)
            if np.min(dist) <= tol * max(1.0, float(np.linalg.norm(pt))):
                continue
        kept.append(pt)
    return np.asarray(kept)


def enumerate_vertices(p: HPolytope, tol: float = FEAS_TOL, *, check_bounded: bool = True,
                       dedupe_tol: float = RANK_TOL) -> np.ndarray:
    """All vertices of a bounded, non-empty polytope, as an (n_v, d) array.

    Raises
    ------
    UnboundedPolytopeError
        If ``check_bounded`` and the polytope has a recession direction.
    EmptyPolytopeError
        If no feasible vertex exists.
    """
    d = p.dim
    if d > MAX_ENUM_DIM:
        raise PolytopeError(f"vertex enumeration supports d <= {MAX_ENUM_DIM}, got {d}")
    if check_bounded and not is_bounded(p):
        raise UnboundedPolytopeError("polytope is unbounded")
    a, b = _normalized(p)
    k = a.shape[0]
    if k < d:
        raise UnboundedPolytopeError("fewer rows than dimensions")
    combos = _combos(k, d)
    found = []
    for start in range(0, len(combos), _CHUNK):
        idx = combos[start:start + _CHUNK]
        mats = a[idx]
        good = np.abs(np.linalg.det(mats)) > DET_TOL
        if not np.any(good):
            continue
        idx, mats = idx[good], mats[good]
        sol = np.linalg.solve(mats, b[idx][..., None])[..., 0]
        slack = a @ sol.T - b[:, None]
        feas = np.all(slack <= tol, axis=0)
        if np.any(feas):
            found.append(sol[feas])
    if not found:
        raise EmptyPolytopeError("polytope has no vertices (empty)")
    return _dedupe(np.vstack(found), dedupe_tol)


def _affine_rank(points: np.ndarray, tol: float = RANK_TOL) -> int:
    if len(points) <= 1:
        return 0
    centered = points[1:] - points[0]
    sv = np.linalg.svd(centered, compute_uv=False)
    scale = max(1.0, float(np.max(np.abs(points))))
    return int(np.sum(sv > tol * scale))


def remove_redundant(p: HPolytope, tol: float = FEAS_TOL, *, method: str = "lp",
                     vertices: np.ndarray | None = None) -> HPolytope:
    """Drop every row whose removal leaves the point set unchanged.

    ``method="lp"`` runs the per-row test ``max a_i^T x`` over the remaining
    rows (row i relaxed by one unit to keep the LP bounded); the row is
    redundant when the optimum does not exceed ``b_i + tol``. Rows are tested
    from the last to the first, so among duplicates the lowest index survives.

    ``method="vertex"`` needs a bounded, full-dimensional polytope: a row is
    kept iff the vertices lying on its hyperplane span a (d-1)-dimensional
    affine set. It falls back to the LP test otherwise.
    """
    if method == "vertex":
        try:
            reduced = _facet_rows(p, tol, vertices)
        except PolytopeError:
            reduced = None
        if reduced is not None:
            return reduced
    elif method != "lp":
        raise ValueError(f"unknown redundancy method {method!r}")
    return _remove_redundant_lp(p, tol)


def _remove_redundant_lp(p: HPolytope, tol: float) -> HPolytope:
    a, b = p.a_mat, p.b_vec
    feas = solve_lp(np.zeros(p.dim), a, b)
    if feas.status is Status.INFEASIBLE:
        raise EmptyPolytopeError("polytope is empty")
    keep = np.linalg.norm(a, axis=1) > 0
    for i in range(p.n_rows - 1, -1, -1):
        if not keep[i]:
            continue
        others = keep.copy()
        others[i] = False
        rows = np.vstack([a[others], a[i]])
        rhs = np.append(b[others], b[i] + 1.0)
        res = solve_lp(-a[i], rows, rhs)
        if res.status is Status.OPTIMAL and -res.objective <= b[i] + tol * max(1.0, np.linalg.norm(a[i])):
            keep[i] = False
    return HPolytope(a[keep], b[keep])


def _facet_rows(p: HPolytope, tol: float, vertices: np.ndarray | None) -> HPolytope | None:
    d = p.dim
    verts = enumerate_vertices(p, tol, check_bounded=False) if vertices is None else vertices
    if _affine_rank(verts) < d:
        return None
    norms = np.linalg.norm(p.a_mat, axis=1)
    an = p.a_mat / norms[:, None]
    bn = p.b_vec / norms
    on_plane = np.abs(an @ verts.T - bn[:, None]) <= tol
    keep = np.zeros(p.n_rows, dtype=bool)
    for i in range(p.n_rows):
        pts = verts[on_plane[i]]
        if len(pts) < d or _affine_rank(pts) != d - 1:
            continue
        dup = keep[:i] & (np.linalg.norm(an[:i] - an[i], axis=1) <= RANK_TOL) \
            & (np.abs(bn[:i] - bn[i]) <= tol)
        if not np.any(dup):
            keep[i] = True
    return HPolytope(p.a_mat[keep], p.b_vec[keep])


def chebyshev_center(p: HPolytope) -> tuple[np.ndarray, float]:
    """Center and radius of the largest inscribed Euclidean ball."""
    d = p.dim
    norms = np.linalg.norm(p.a_mat, axis=1)
    rows = np.vstack([np.hstack([p.a_mat, norms[:, None]]), np.append(np.zeros(d), -1.0)])
    rhs = np.append(p.b_vec, 0.0)
    cost = np.append(np.zeros(d), -1.0)
    res = solve_lp(cost, rows, rhs)
    if res.status is Status.INFEASIBLE:
        raise EmptyPolytopeError("polytope is empty")
    if res.status is Status.UNBOUNDED:
        raise UnboundedPolytopeError("Chebyshev LP unbounded")
    if res.status is not Status.OPTIMAL:
        raise PolytopeError(f"Chebyshev LP failed: {res.info}")
    return res.x[:d].copy(), float(max(res.x[d], 0.0))


def hull_volume(vertices: np.ndarray) -> float:
    """Volume of the convex hull of ``vertices`` (0 for degenerate sets)."""
    from scipy.spatial import ConvexHull, QhullError

    vertices = np.asarray(vertices, dtype=float)
    d = vertices.shape[1]
    if d == 1:
        return float(np.ptp(vertices[:, 0]))
    if len(vertices) <= d or _affine_rank(vertices) < d:
        return 0.0
    try:
        return float(ConvexHull(vertices).volume)
    except QhullError:
        return 0.0
