"""Receding-horizon program over the stacked input sequence ``U``.

Both controllers share the cost

    y(t)^T Q y(t) + sum_{j=1..N} yhat_j^T Q yhat_j + sum_{k=0..N-1} u_k^T S u_k,

with ``yhat_j = H_nom phi(t+j|t)``, the hard input rows ``C u_k <= g``, and
the steady-state terminal row ``phi(t+N|t) = W phi(t+N|t) + Z u_{N-1}``.
They differ in the nominal model and in the output rows imposed at every
model vertex ``f`` and every step ``j``:

* stochastic: ``kappa sqrt(phibar^T Gamma phibar) + E f phi_j <= p``
* robust:     ``E f phi_j + |E| w_bar <= p``
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import chance
from .chance import ChanceSpec
from .fir import FirDims, build_shift_operators, prediction_maps
from .solvers import ConeRow, SolveReport, Status, primal_residual, solve_qp, solve_qp_soc

MODES = ("stochastic", "robust")


class MpcError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class MpcConfig:
    horizon: int
    q_weight: np.ndarray
    s_weight: np.ndarray
    c_mat: np.ndarray
    g_vec: np.ndarray
    mode: str = "stochastic"

    def __post_init__(self):
        q = np.atleast_2d(np.array(self.q_weight, dtype=float))
        s = np.atleast_2d(np.array(self.s_weight, dtype=float))
        c = np.atleast_2d(np.array(self.c_mat, dtype=float))
        g = np.atleast_1d(np.array(self.g_vec, dtype=float)).ravel()
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if c.shape[0] != g.size:
            raise ValueError(f"C has {c.shape[0]} rows but g has {g.size} entries")
        if np.min(np.linalg.eigvalsh(0.5 * (s + s.T))) <= 0:
            raise ValueError("S must be positive definite")
        if np.min(np.linalg.eigvalsh(0.5 * (q + q.T))) < -1e-12:
            raise ValueError("Q must be positive semidefinite")
        object.__setattr__(self, "q_weight", q)
        object.__setattr__(self, "s_weight", s)
        object.__setattr__(self, "c_mat", c)
        object.__setattr__(self, "g_vec", g)

    def check(self, dims: FirDims) -> None:
        if self.horizon <= dims.m:
            raise ValueError(f"horizon {self.horizon} must exceed regressor length m={dims.m}")
        if self.q_weight.shape != (dims.n_y, dims.n_y) or self.s_weight.shape != (dims.n_u, dims.n_u):
            raise ValueError("weight shapes do not match the plant dimensions")
        if self.c_mat.shape[1] != dims.n_u:
            raise ValueError(f"C must have {dims.n_u} columns")

    def with_mode(self, mode: str) -> "MpcConfig":
        return MpcConfig(self.horizon, self.q_weight, self.s_weight, self.c_mat, self.g_vec, mode)


@dataclass(eq=False)
class ConicProgram:
    """``min 0.5 U^T P U + q^T U + const`` over linear and cone rows.

    ``phi_offset[j] + phi_gain[j] @ U`` is the predicted regressor
    ``phi(t+j+1|t)``.
    """

    p_mat: np.ndarray
    q_vec: np.ndarray
    const: float
    g_mat: np.ndarray
    h_vec: np.ndarray
    a_mat: np.ndarray
    b_vec: np.ndarray
    cones: list = field(default_factory=list)
    row_kinds: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype="<U8"))
    phi_offset: Optional[np.ndarray] = None
    phi_gain: Optional[np.ndarray] = None
    n_u: int = 1

    @property
    def n_dec(self) -> int:
        return self.q_vec.size

    @property
    def horizon(self) -> int:
        return self.n_dec // self.n_u

    def count(self, kind: str) -> int:
        return int(np.sum(self.row_kinds == kind))


@dataclass
class MpcSolution:
    u_seq: Optional[np.ndarray]
    status: Status
    objective: float
    predicted_regressors: Optional[np.ndarray]
    report: Optional[SolveReport] = None

    @property
    def ok(self) -> bool:
        return self.status is Status.OPTIMAL


def _as_vertex_stack(vertices, dims: FirDims) -> np.ndarray:
    verts = np.asarray(vertices, dtype=float)
    if verts.ndim == 2:
        # list of flattened models
        verts = verts.reshape(-1, dims.n_y, dims.n_phi)
    if verts.ndim != 3 or verts.shape[1:] != (dims.n_y, dims.n_phi) or verts.shape[0] == 0:
        raise ValueError(f"vertices must be a non-empty stack of {dims.n_y} x {dims.n_phi} models")
    return verts


def _assemble_common(phi_t, y_t, nominal, cfg: MpcConfig, dims: FirDims):
    cfg.check(dims)
    phi_t = np.atleast_1d(np.asarray(phi_t, dtype=float)).ravel()
    y_t = np.atleast_1d(np.asarray(y_t, dtype=float)).ravel()
    nominal = np.atleast_2d(np.asarray(nominal, dtype=float))
    if phi_t.size != dims.n_phi or y_t.size != dims.n_y or nominal.shape != (dims.n_y, dims.n_phi):
        raise ValueError("phi_t, y_t or nominal model has the wrong dimension")
    n_hor, n_u = cfg.horizon, dims.n_u
    nd = n_hor * n_u
    offset, gain = prediction_maps(dims, n_hor)
    phi_off = offset @ phi_t  # (N, n_phi)

    q = cfg.q_weight
    out_gain = np.einsum("yk,jkd->jyd", nominal, gain)  # (N, n_y, nd)
    out_off = phi_off @ nominal.T  # (N, n_y)
    p_mat = 2.0 * (np.einsum("jyd,yz,jze->de", out_gain, q, out_gain) + np.kron(np.eye(n_hor), cfg.s_weight))
    q_vec = 2.0 * np.einsum("jyd,yz,jz->d", out_gain, q, out_off)
    const = float(np.einsum("jy,yz,jz->", out_off, q, out_off) + y_t @ q @ y_t)

    n_c = cfg.c_mat.shape[0]
    g_in = np.kron(np.eye(n_hor), cfg.c_mat)
    h_in = np.tile(cfg.g_vec, n_hor)

    ops = build_shift_operators(dims)
    i_w = np.eye(dims.n_phi) - ops.w_op
    select_last = np.zeros((n_u, nd))
    select_last[:, nd - n_u:] = np.eye(n_u)
    a_term = i_w @ gain[-1] - ops.z_op @ select_last
    b_term = -i_w @ phi_off[-1]
    return dict(p_mat=p_mat, q_vec=q_vec, const=const, g_in=g_in, h_in=h_in, n_c=n_c,
                a_term=a_term, b_term=b_term, phi_off=phi_off, gain=gain, nd=nd)


def _finish(parts, out_g, out_h, cones, kinds_out) -> ConicProgram:
    g_mat = np.vstack([parts["g_in"], out_g]) if len(out_h) else parts["g_in"]
    h_vec = np.concatenate([parts["h_in"], out_h]) if len(out_h) else parts["h_in"]
    kinds = np.array(["input"] * parts["h_in"].size + [kinds_out] * len(out_h), dtype="<U8")
    n_u = parts["nd"] // parts["phi_off"].shape[0]
    return ConicProgram(parts["p_mat"], parts["q_vec"], parts["const"], g_mat, h_vec,
                        parts["a_term"], parts["b_term"], cones, kinds,
                        parts["phi_off"], parts["gain"], n_u)


def assemble_stochastic(phi_t, y_t, nominal, vertices, cc: ChanceSpec, gamma,
                        cfg: MpcConfig, dims: FirDims, *, cone_form: bool = False) -> ConicProgram:
    """Program with distributionally robust chance rows at every vertex.

    When Gamma only weights the constant slots of ``phibar`` the square-root
    term is a constant and the rows are posed as linear inequalities, unless
    ``cone_form`` forces the explicit second-order-cone rows.
    """
    verts = _as_vertex_stack(vertices, dims)
    parts = _assemble_common(phi_t, y_t, nominal, cfg, dims)
    ef = np.einsum("y,vyk->vk", cc.e_row, verts)  # (n_v, n_phi)
    tight = chance.constant_tightening(gamma, cc)
    phi_off, gain = parts["phi_off"], parts["gain"]
    n_hor = phi_off.shape[0]
    if tight is not None and not cone_form:
        out_g = np.concatenate([ef @ gain[j] for j in range(n_hor)])
        out_h = np.concatenate([cc.p - tight - ef @ phi_off[j] for j in range(n_hor)])
        return _finish(parts, out_g, out_h, [], "chance")

    root = cc.kappa * chance.gamma_sqrt(gamma)
    cones = []
    pad = np.zeros((2, parts["nd"]))
    for j in range(n_hor):
        a_c = root @ np.vstack([gain[j], pad])
        b_c = root @ chance.appended_regressor(phi_off[j])
        for f in ef:
            cones.append(ConeRow(a_c, b_c, -(f @ gain[j]), float(cc.p - f @ phi_off[j])))
    prog = _finish(parts, [], [], cones, "chance")
    return prog


def assemble_robust(phi_t, y_t, cheb_center, vertices, w_bar, cc: ChanceSpec,
                    cfg: MpcConfig, dims: FirDims) -> ConicProgram:
    """Program with hard worst-case output rows ``E f phi_j + |E| w_bar <= p``."""
    verts = _as_vertex_stack(vertices, dims)
    parts = _assemble_common(phi_t, y_t, cheb_center, cfg, dims)
    w_bar = np.atleast_1d(np.asarray(w_bar, dtype=float)).ravel()
    worst = float(np.abs(cc.e_row) @ w_bar)
    ef = np.einsum("y,vyk->vk", cc.e_row, verts)
    phi_off, gain = parts["phi_off"], parts["gain"]
    n_hor = phi_off.shape[0]
    out_g = np.concatenate([ef @ gain[j] for j in range(n_hor)])
    out_h = np.concatenate([cc.p - worst - ef @ phi_off[j] for j in range(n_hor)])
    return _finish(parts, out_g, out_h, [], "output")


def predicted_regressors(prog: ConicProgram, u_seq) -> np.ndarray:
    """``phi(t+1|t), ..., phi(t+N|t)`` for a given input sequence, shape (N, n_phi)."""
    u = np.asarray(u_seq, dtype=float).ravel()
    return prog.phi_offset + prog.phi_gain @ u


def evaluate_objective(prog: ConicProgram, u_seq) -> float:
    u = np.asarray(u_seq, dtype=float).ravel()
    return float(0.5 * u @ prog.p_mat @ u + prog.q_vec @ u + prog.const)


def constraint_residual(prog: ConicProgram, u_seq) -> float:
    """Largest violation of any row of ``prog`` at ``u_seq`` (0 if feasible)."""
    u = np.asarray(u_seq, dtype=float).ravel()
    return primal_residual(u, prog.g_mat, prog.h_vec, prog.a_mat, prog.b_vec, prog.cones)


def solve(prog: ConicProgram) -> MpcSolution:
    if prog.cones:
        report = solve_qp_soc(prog.p_mat, prog.q_vec, prog.g_mat, prog.h_vec,
                              prog.a_mat, prog.b_vec, prog.cones)
    else:
        report = solve_qp(prog.p_mat, prog.q_vec, prog.g_mat, prog.h_vec, prog.a_mat, prog.b_vec)
    if report.status is not Status.OPTIMAL:
        return MpcSolution(None, report.status, np.nan, None, report)
    u_seq = report.x.reshape(prog.horizon, prog.n_u)
    return MpcSolution(u_seq, report.status, report.objective + prog.const,
                       predicted_regressors(prog, report.x), report)


def first_input(sol: MpcSolution) -> np.ndarray:
    if not sol.ok:
        raise MpcError(f"no input available from a {sol.status.value} solution")
    return sol.u_seq[0].copy()


def shifted_candidate(prev: MpcSolution | np.ndarray) -> np.ndarray:
    """Drop the first input block and repeat the last one."""
    u = prev.u_seq if isinstance(prev, MpcSolution) else np.asarray(prev, dtype=float)
    if u is None:
        raise MpcError("previous solution has no input sequence")
    u = np.asarray(u, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    return np.vstack([u[1:], u[-1:]])
