"""Dense solvers for the small convex programs used throughout the package.

Three problem classes are covered:

* ``solve_lp``      -- linear programs (redundancy tests, Chebyshev centers),
                       delegated to HiGHS through :func:`scipy.optimize.linprog`.
* ``solve_qp``      -- convex QPs with linear inequality/equality rows, solved
                       by a dense Mehrotra predictor-corrector interior-point
                       method implemented here.
* ``solve_qp_soc``  -- QPs with additional second-order-cone rows
                       ``||A_c x + b_c|| <= c^T x + d``, delegated to Clarabel.

Every solver returns a :class:`SolveReport` whose residuals are recomputed
from the returned point, independently of the solver's own bookkeeping.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.optimize
import scipy.sparse as sp

FEAS_TOL = 1e-6
GAP_TOL = 1e-8
MAX_ITER = 200


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    SOLVER_FAILURE = "solver_failure"


@dataclass
class SolveReport:
    """Outcome of a solve.

    ``certificate`` holds a Farkas vector ``(z, y)`` for infeasible problems
    (``G^T z + A^T y = 0``, ``z >= 0``, ``h^T z + b^T y < 0``) and a ray for
    unbounded LPs, when one is available.
    """

    status: Status
    x: Optional[np.ndarray]
    objective: float
    primal_residual: float
    dual_residual: float
    iterations: int
    dual_bound: float = -np.inf
    certificate: Optional[tuple] = None
    info: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status is Status.OPTIMAL


@dataclass(frozen=True)
class ConeRow:
    """Second-order-cone row ``||a_mat @ x + b_vec||_2 <= c_vec @ x + d``."""

    a_mat: np.ndarray
    b_vec: np.ndarray
    c_vec: np.ndarray
    d: float

    def residual(self, x: np.ndarray) -> float:
        return float(np.linalg.norm(self.a_mat @ x + self.b_vec) - (self.c_vec @ x + self.d))


def _as_rows(mat, vec, n: int) -> tuple[np.ndarray, np.ndarray]:
    if mat is None:
        return np.zeros((0, n)), np.zeros(0)
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    vec = np.atleast_1d(np.asarray(vec, dtype=float)).ravel()
    if mat.size == 0:
        return np.zeros((0, n)), np.zeros(0)
    if mat.shape[1] != n or mat.shape[0] != vec.size:
        raise ValueError(f"constraint shape mismatch: {mat.shape} vs rhs {vec.shape}, n={n}")
    return mat, vec


def primal_residual(x, g_mat=None, h_vec=None, a_mat=None, b_vec=None, cones=()) -> float:
    """Largest constraint violation of ``x`` (0 when feasible)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    g_mat, h_vec = _as_rows(g_mat, h_vec, n)
    a_mat, b_vec = _as_rows(a_mat, b_vec, n)
    worst = 0.0
    if h_vec.size:
        worst = max(worst, float(np.max(g_mat @ x - h_vec)))
    if b_vec.size:
        worst = max(worst, float(np.max(np.abs(a_mat @ x - b_vec))))
    for cone in cones:
        worst = max(worst, cone.residual(x))
    return max(worst, 0.0)


# --------------------------------------------------------------------------
# LP
# --------------------------------------------------------------------------

def solve_lp(c, g_mat=None, h_vec=None, a_mat=None, b_vec=None) -> SolveReport:
    """Minimize ``c^T x`` subject to ``G x <= h`` and ``A x = b`` (x free)."""
    c = np.asarray(c, dtype=float).ravel()
    n = c.size
    g_mat, h_vec = _as_rows(g_mat, h_vec, n)
    a_mat, b_vec = _as_rows(a_mat, b_vec, n)
    res = scipy.optimize.linprog(
        c,
        A_ub=g_mat if h_vec.size else None,
        b_ub=h_vec if h_vec.size else None,
        A_eq=a_mat if b_vec.size else None,
        b_eq=b_vec if b_vec.size else None,
        bounds=[(None, None)] * n,
        method="highs",
    )
    iters = int(getattr(res, "nit", 0) or 0)
    if res.status == 0:
        x = np.asarray(res.x, dtype=float)
        lam = np.zeros(0) if not h_vec.size else np.asarray(res.ineqlin.marginals)
        nu = np.zeros(0) if not b_vec.size else np.asarray(res.eqlin.marginals)
        # HiGHS marginals are d(obj)/d(rhs): nonpositive for <= rows
        dual_bound = float(h_vec @ lam + b_vec @ nu)
        dual_res = c - g_mat.T @ lam - a_mat.T @ nu if n else np.zeros(0)
        return SolveReport(
            Status.OPTIMAL,
            x,
            float(c @ x),
            primal_residual(x, g_mat, h_vec, a_mat, b_vec),
            float(np.max(np.abs(dual_res))) if n else 0.0,
            iters,
            dual_bound=dual_bound,
        )
    if res.status == 2:
        cert = farkas_certificate(g_mat, h_vec, a_mat, b_vec)
        return SolveReport(Status.INFEASIBLE, None, np.inf, np.inf, np.inf, iters, certificate=cert)
    if res.status == 3:
        return SolveReport(Status.UNBOUNDED, None, -np.inf, np.inf, np.inf, iters,
                           dual_bound=-np.inf, info={"message": res.message})
    return SolveReport(Status.SOLVER_FAILURE, None, np.nan, np.inf, np.inf, iters,
                       info={"message": res.message})


def farkas_certificate(g_mat, h_vec, a_mat, b_vec) -> Optional[tuple]:
    """Return ``(z, y)`` proving ``{G x <= h, A x = b}`` empty, or None.

    Solves the alternative system ``G^T z + A^T y = 0``, ``z >= 0``,
    ``h^T z + b^T y = -1`` as an LP feasibility problem.
    """
    mg, mb = h_vec.size, b_vec.size
    n = g_mat.shape[1] if mg else a_mat.shape[1]
    nv = mg + mb
    if nv == 0:
        return None
    eq = np.vstack([
        np.hstack([g_mat.T if mg else np.zeros((n, 0)), a_mat.T if mb else np.zeros((n, 0))]),
        np.hstack([h_vec, b_vec])[None, :],
    ])
    rhs = np.concatenate([np.zeros(n), [-1.0]])
    bounds = [(0, None)] * mg + [(None, None)] * mb
    res = scipy.optimize.linprog(np.zeros(nv), A_eq=eq, b_eq=rhs, bounds=bounds, method="highs")
    if res.status != 0:
        return None
    return np.asarray(res.x[:mg]), np.asarray(res.x[mg:])


# --------------------------------------------------------------------------
# QP: dense primal-dual interior point
# --------------------------------------------------------------------------

def _reduce_equalities(a_mat: np.ndarray, b_vec: np.ndarray, tol: float = 1e-10):
    """Drop zero and linearly dependent equality rows.

    Returns an orthonormal-row system ``(A', b')`` with the same solution set,
    or ``None`` when the rows are inconsistent.
    """
    if b_vec.size == 0:
        return a_mat, b_vec
    u, sv, vt = np.linalg.svd(a_mat, full_matrices=False)
    scale = max(1.0, sv[0] if sv.size else 0.0)
    rank = int(np.sum(sv > tol * scale))
    ub = u.T @ b_vec
    if rank < ub.size and np.max(np.abs(ub[rank:])) > 1e-8 * max(1.0, np.max(np.abs(b_vec))):
        return None
    return vt[:rank], ub[:rank] / sv[:rank]


def _max_step(v: np.ndarray, dv: np.ndarray) -> float:
    neg = dv < 0
    if not np.any(neg):
        return 1.0
    return float(min(1.0, np.min(-v[neg] / dv[neg])))


def solve_qp(p_mat, q_vec, g_mat=None, h_vec=None, a_mat=None, b_vec=None,
             *, max_iter: int = MAX_ITER, feas_tol: float = FEAS_TOL,
             gap_tol: float = GAP_TOL) -> SolveReport:
    """Minimize ``0.5 x^T P x + q^T x`` s.t. ``G x <= h``, ``A x = b``.

    Mehrotra predictor-corrector on the reduced (normal-equations) KKT
    system. Deterministic: no randomness, fixed operation order.
    """
    q_vec = np.asarray(q_vec, dtype=float).ravel()
    n = q_vec.size
    p_mat = np.zeros((n, n)) if p_mat is None else np.asarray(p_mat, dtype=float)
    p_mat = 0.5 * (p_mat + p_mat.T)
    g_mat, h_vec = _as_rows(g_mat, h_vec, n)
    a_raw, b_raw = _as_rows(a_mat, b_vec, n)

    reduced = _reduce_equalities(a_raw, b_raw)
    if reduced is None:
        cert = farkas_certificate(g_mat, h_vec, a_raw, b_raw)
        return SolveReport(Status.INFEASIBLE, None, np.inf, np.inf, np.inf, 0, certificate=cert)
    a_mat, b_vec = reduced
    me, mi = b_vec.size, h_vec.size

    def kkt_solve(hess, rhs_x, rhs_y):
        if me == 0:
            kkt, rhs = hess, rhs_x
        else:
            kkt = np.block([[hess, a_mat.T], [a_mat, np.zeros((me, me))]])
            rhs = np.concatenate([rhs_x, rhs_y])
        try:
            sol = np.linalg.solve(kkt, rhs)
            # one step of iterative refinement
            sol = sol + np.linalg.solve(kkt, rhs - kkt @ sol)
        except np.linalg.LinAlgError:
            sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
        return sol[:n], sol[n:]

    reg = 1e-12 * max(1.0, float(np.max(np.abs(p_mat))) if n else 1.0)
    eye = np.eye(n)

    if mi == 0:
        x, y = kkt_solve(p_mat + reg * eye, -q_vec, b_vec)
        return _finish_qp(p_mat, q_vec, g_mat, h_vec, a_raw, b_raw, a_mat, x, np.zeros(0), y, 1,
                          feas_tol)

    # initial point (CVXOPT-style): least-squares slack fit, then shift positive
    x, y = kkt_solve(p_mat + g_mat.T @ g_mat + reg * eye, g_mat.T @ h_vec - q_vec, b_vec)
    s = h_vec - g_mat @ x
    z = -s.copy()
    shift = -np.min(s)
    if shift >= -1e-8:
        s = s + 1.0 + shift
    shift = -np.min(z)
    if shift >= -1e-8:
        z = z + 1.0 + shift

    scale_q = float(np.max(np.abs(q_vec))) if n else 0.0
    scale_h = 1.0 + float(np.max(np.abs(h_vec)))
    scale_b = 1.0 + (float(np.max(np.abs(b_vec))) if me else 0.0)

    it = 0
    best = None
    for it in range(1, max_iter + 1):
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(z)) and np.all(np.isfinite(s))):
            it = max_iter + 1
            break
        px = p_mat @ x
        gz = g_mat.T @ z
        r_d = px + q_vec + gz + (a_mat.T @ y if me else 0.0)
        r_p = a_mat @ x - b_vec if me else np.zeros(0)
        r_g = g_mat @ x + s - h_vec
        gap = float(s @ z)
        mu = gap / mi
        obj = 0.5 * x @ px + q_vec @ x
        scale_d = 1.0 + max(float(np.max(np.abs(px))) if n else 0.0, scale_q, float(np.max(np.abs(gz))))
        e_d = float(np.max(np.abs(r_d))) / scale_d
        e_p = max(float(np.max(np.abs(r_g))) / scale_h,
                  float(np.max(np.abs(r_p))) / scale_b if me else 0.0)
        e_gap = gap / max(1.0, abs(obj))
        err = max(e_d, e_p, e_gap)
        if best is None or err < best[0]:
            best = (err, x.copy(), z.copy(), y.copy(), it)
        if e_d <= 1e-10 and e_p <= 1e-10 and e_gap <= gap_tol:
            break
        if np.max(np.abs(z)) > 1e13 or np.max(np.abs(x)) > 1e13 or mu < 1e-30:
            it = max_iter + 1
            break

        w = z / s
        hess = p_mat + (g_mat.T * w) @ g_mat + reg * eye

        def direction(r_sz):
            # dz = W G dx + S^-1 (Z r_g - r_sz); ds = -r_g - G dx
            tmp = (z * r_g - r_sz) / s
            dx, dy = kkt_solve(hess, -r_d - g_mat.T @ tmp, -r_p)
            dz = w * (g_mat @ dx) + tmp
            ds = -r_g - g_mat @ dx
            return dx, dy, dz, ds

        dx, dy, dz, ds = direction(s * z)
        alpha = min(_max_step(s, ds), _max_step(z, dz))
        mu_aff = float((s + alpha * ds) @ (z + alpha * dz)) / mi
        sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.0
        dx, dy, dz, ds = direction(s * z + ds * dz - sigma * mu)
        alpha = min(1.0, 0.99 * min(_max_step(s, ds), _max_step(z, dz)))
        if float((s + alpha * ds) @ (z + alpha * dz)) / mi > (1.0 - 0.01 * alpha) * mu:
            # the corrector lost centrality: take a plain centering step instead
            dx, dy, dz, ds = direction(s * z - max(sigma, 0.3) * mu)
            alpha = min(1.0, 0.99 * min(_max_step(s, ds), _max_step(z, dz)))
        x = x + alpha * dx
        y = y + alpha * dy if me else y
        z = z + alpha * dz
        s = s + alpha * ds
        s = np.maximum(s, 1e-300)
        z = np.maximum(z, 1e-300)
    else:
        it = max_iter + 1

    if it > max_iter and best is not None:
        # accept the best iterate if it meets the residual contract
        _, xb, zb, yb, itb = best
        report = _finish_qp(p_mat, q_vec, g_mat, h_vec, a_raw, b_raw, a_mat, xb, zb, yb, itb, feas_tol)
        if report.status is Status.OPTIMAL and report.objective - report.dual_bound <= 1e-6 * max(1.0, abs(report.objective)):
            report.info["fallback"] = True
            return report
    if it > max_iter:
        cert = farkas_certificate(g_mat, h_vec, a_raw, b_raw)
        status = Status.INFEASIBLE if cert is not None else Status.SOLVER_FAILURE
        return SolveReport(status, None, np.nan, np.inf, np.inf, min(it, max_iter), certificate=cert)
    return _finish_qp(p_mat, q_vec, g_mat, h_vec, a_raw, b_raw, a_mat, x, z, y, it, feas_tol)


def _finish_qp(p_mat, q_vec, g_mat, h_vec, a_raw, b_raw, a_red, x, z, y, it, feas_tol):
    obj = float(0.5 * x @ p_mat @ x + q_vec @ x)
    # map reduced equality multipliers back to the caller's rows
    y_full = np.linalg.lstsq(a_raw.T, a_red.T @ y, rcond=None)[0] if b_raw.size else np.zeros(0)
    r_d = p_mat @ x + q_vec + g_mat.T @ z + (a_raw.T @ y_full if b_raw.size else 0.0)
    pres = primal_residual(x, g_mat, h_vec, a_raw, b_raw)
    dres = float(np.max(np.abs(r_d))) if x.size else 0.0
    dual = float(-0.5 * x @ p_mat @ x - h_vec @ z - b_raw @ y_full)
    status = Status.OPTIMAL if pres <= feas_tol and dres <= feas_tol else Status.SOLVER_FAILURE
    return SolveReport(status, x, obj, pres, dres, it, dual_bound=dual,
                       info={"z": z, "y": y_full})


# --------------------------------------------------------------------------
# QP with second-order-cone rows
# --------------------------------------------------------------------------

def solve_qp_soc(p_mat, q_vec, g_mat=None, h_vec=None, a_mat=None, b_vec=None,
                 cones: Sequence[ConeRow] = (), *, feas_tol: float = FEAS_TOL) -> SolveReport:
    """Minimize ``0.5 x^T P x + q^T x`` with linear rows and SOC rows (Clarabel)."""
    import clarabel

    q_vec = np.asarray(q_vec, dtype=float).ravel()
    n = q_vec.size
    p_mat = np.zeros((n, n)) if p_mat is None else np.asarray(p_mat, dtype=float)
    p_mat = 0.5 * (p_mat + p_mat.T)
    g_mat, h_vec = _as_rows(g_mat, h_vec, n)
    a_mat, b_vec = _as_rows(a_mat, b_vec, n)

    blocks, rhs, cone_specs = [], [], []
    if b_vec.size:
        blocks.append(a_mat)
        rhs.append(b_vec)
        cone_specs.append(clarabel.ZeroConeT(b_vec.size))
    if h_vec.size:
        blocks.append(g_mat)
        rhs.append(h_vec)
        cone_specs.append(clarabel.NonnegativeConeT(h_vec.size))
    for cone in cones:
        # s = [c^T x + d; A_c x + b_c] in SOC  <=>  -[c; A_c] x + s = [d; b_c]
        blocks.append(-np.vstack([cone.c_vec[None, :], np.atleast_2d(cone.a_mat)]))
        rhs.append(np.concatenate([[cone.d], np.atleast_1d(cone.b_vec)]))
        cone_specs.append(clarabel.SecondOrderConeT(1 + np.atleast_1d(cone.b_vec).size))

    big_a = sp.csc_matrix(np.vstack(blocks)) if blocks else sp.csc_matrix((0, n))
    big_b = np.concatenate(rhs) if rhs else np.zeros(0)
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.tol_gap_abs = 1e-10
    settings.tol_gap_rel = 1e-10
    settings.tol_feas = 1e-10
    settings.max_iter = MAX_ITER
    solver = clarabel.DefaultSolver(sp.csc_matrix(np.triu(p_mat)), q_vec, big_a, big_b,
                                    cone_specs, settings)
    sol = solver.solve()
    status_name = str(sol.status)
    iters = int(sol.iterations)
    if "PrimalInfeasible" in status_name:
        return SolveReport(Status.INFEASIBLE, None, np.inf, np.inf, np.inf, iters,
                           certificate=(np.asarray(sol.z),))
    if "DualInfeasible" in status_name:
        return SolveReport(Status.UNBOUNDED, None, -np.inf, np.inf, np.inf, iters)
    if not status_name.startswith("Solved") and "AlmostSolved" not in status_name:
        return SolveReport(Status.SOLVER_FAILURE, None, np.nan, np.inf, np.inf, iters,
                           info={"clarabel_status": status_name})
    x = np.asarray(sol.x, dtype=float)
    zz = np.asarray(sol.z, dtype=float)
    obj = float(0.5 * x @ p_mat @ x + q_vec @ x)
    pres = primal_residual(x, g_mat, h_vec, a_mat, b_vec, cones)
    dres = float(np.max(np.abs(p_mat @ x + q_vec + big_a.T @ zz))) if n else 0.0
    dual = float(-0.5 * x @ p_mat @ x - big_b @ zz)
    status = Status.OPTIMAL if pres <= feas_tol and dres <= feas_tol else Status.SOLVER_FAILURE
    return SolveReport(status, x, obj, pres, dres, iters, dual_bound=dual,
                       info={"clarabel_status": status_name})
