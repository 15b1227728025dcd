"""Closed-loop simulation, Monte Carlo batches and trace I/O.

One closed-loop step at time ``t`` (after the initial measurement ``y(0)``
has been folded into the set and the estimate):

1. solve the receding-horizon program and apply ``u(t) = u*(t|t)``;
2. measure ``y(t+1)`` from the true plant;
3. cut the feasible parameter set, update the RLS estimate, project it;
4. advance ``t``.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np
import yaml
from scipy import stats

from . import fps as fpsmod
from . import mpc
from . import polytope as poly
from . import rls
from .chance import ChanceSpec, build_gamma
from .fir import FirDims, advance_regressor, simulate_output
from .fps import FpsInitSpec
from .solvers import Status

logger = logging.getLogger(__name__)

TRACE_VERSION = 1
SUMMARY_VERSION = 1
WITNESS_TOL = 1e-6

FAMILIES = ("uniform", "truncated-gaussian")
NOMINALS = ("estimate", "chebyshev")
CHANCE_FORMS = ("linear", "cone")


class ScenarioError(ValueError):
    """Invalid scenario file or a scenario that cannot be started."""


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DisturbanceSpec:
    bound: np.ndarray
    family: str = "uniform"
    variance: Optional[np.ndarray] = None
    scale: Optional[float] = None

    def __post_init__(self):
        bound = np.atleast_1d(np.array(self.bound, dtype=float)).ravel()
        if np.any(bound < 0):
            raise ScenarioError("disturbance bound must be nonnegative")
        if self.family not in FAMILIES:
            raise ScenarioError(f"disturbance family must be one of {FAMILIES}")
        var = self.variance
        if var is None:
            var = np.diag(bound ** 2 / 3.0)
        var = np.atleast_2d(np.array(var, dtype=float))
        if var.shape != (bound.size, bound.size):
            raise ScenarioError("disturbance variance must be n_y x n_y")
        object.__setattr__(self, "bound", bound)
        object.__setattr__(self, "variance", var)


@dataclass(frozen=True, eq=False)
class EstimatorInit:
    mean0: np.ndarray
    cov0: np.ndarray
    joseph: bool = False
    feed_projection: bool = False


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    dims: FirDims
    mpc: mpc.MpcConfig
    chance: ChanceSpec
    disturbance: DisturbanceSpec
    true_model: np.ndarray
    phi0: np.ndarray
    fps_init: FpsInitSpec
    estimator: EstimatorInit
    steps: int = 20
    mode: str = "stochastic"
    nominal: str = "estimate"
    chance_form: str = "linear"
    fps_method: str = "vertex"
    max_rows: int = fpsmod.DEFAULT_MAX_ROWS
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        d = self.dims
        h = np.atleast_2d(np.array(self.true_model, dtype=float))
        phi0 = np.atleast_1d(np.array(self.phi0, dtype=float)).ravel()
        if h.shape != (d.n_y, d.n_phi):
            raise ScenarioError(f"true_model must be {d.n_y} x {d.n_phi}")
        if phi0.size != d.n_phi:
            raise ScenarioError(f"phi0 must have length {d.n_phi}")
        if self.disturbance.bound.size != d.n_y or self.chance.e_row.size != d.n_y:
            raise ScenarioError("disturbance bound and E must have n_y entries")
        if np.asarray(self.estimator.mean0).size != d.n_params:
            raise ScenarioError(f"estimator mean0 must have {d.n_params} entries")
        if self.mode not in mpc.MODES:
            raise ScenarioError(f"mode must be one of {mpc.MODES}")
        if self.nominal not in NOMINALS:
            raise ScenarioError(f"nominal must be one of {NOMINALS}")
        if self.chance_form not in CHANCE_FORMS:
            raise ScenarioError(f"chance_form must be one of {CHANCE_FORMS}")
        if self.fps_method not in ("vertex", "lp"):
            raise ScenarioError("fps redundancy method must be 'vertex' or 'lp'")
        if self.steps < 0:
            raise ScenarioError("steps must be >= 0")
        try:
            self.mpc.check(d)
        except ValueError as exc:
            raise ScenarioError(str(exc)) from exc
        object.__setattr__(self, "true_model", h)
        object.__setattr__(self, "phi0", phi0)

    def with_mode(self, mode: str) -> "ScenarioConfig":
        return replace(self, mode=mode, mpc=self.mpc.with_mode(mode))


_SCHEMA = {
    "version": None,
    "dims": {"n_u", "n_y", "m"},
    "mpc": {"horizon", "q_weight", "s_weight", "c_mat", "g_vec"},
    "chance": {"e_row", "p", "epsilon"},
    "disturbance": {"bound", "family", "variance", "scale"},
    "true_model": None,
    "phi0": None,
    "fps": {"magnitude", "decay", "max_rows", "redundancy"},
    "estimator": {"mean0", "cov0", "joseph", "feed_projection"},
    "run": {"steps", "mode", "nominal", "chance_form"},
    "notes": "any",
}
_REQUIRED = ("dims", "mpc", "chance", "disturbance", "true_model", "phi0", "estimator")


def _check_keys(raw: dict) -> None:
    if not isinstance(raw, dict):
        raise ScenarioError("scenario must be a mapping")
    unknown = set(raw) - set(_SCHEMA)
    if unknown:
        raise ScenarioError(f"unknown top-level keys: {sorted(unknown)}")
    for key in _REQUIRED:
        if key not in raw:
            raise ScenarioError(f"missing required section {key!r}")
    for key, allowed in _SCHEMA.items():
        if isinstance(allowed, set) and key in raw:
            section = raw[key]
            if not isinstance(section, dict):
                raise ScenarioError(f"section {key!r} must be a mapping")
            extra = set(section) - allowed
            if extra:
                raise ScenarioError(f"unknown keys in {key!r}: {sorted(extra)}")
    if raw.get("version", 1) != 1:
        raise ScenarioError(f"unsupported scenario version {raw.get('version')}")


def scenario_from_dict(raw: dict) -> ScenarioConfig:
    _check_keys(raw)
    try:
        dims = FirDims(**raw["dims"])
        run = raw.get("run", {})
        mode = run.get("mode", "stochastic")
        mcfg = mpc.MpcConfig(mode=mode, **raw["mpc"])
        chance = ChanceSpec(**raw["chance"])
        dist = DisturbanceSpec(**raw["disturbance"])
        fps_raw = dict(raw.get("fps", {}))
        method = fps_raw.pop("redundancy", "vertex")
        max_rows = int(fps_raw.pop("max_rows", fpsmod.DEFAULT_MAX_ROWS))
        fps_init = FpsInitSpec(**fps_raw)
        est = raw["estimator"]
        estimator = EstimatorInit(np.asarray(est["mean0"], dtype=float),
                                  np.asarray(est["cov0"], dtype=float),
                                  bool(est.get("joseph", False)),
                                  bool(est.get("feed_projection", False)))
        return ScenarioConfig(
            dims, mcfg, chance, dist, raw["true_model"], raw["phi0"], fps_init, estimator,
            steps=int(run.get("steps", 20)), mode=mode, nominal=run.get("nominal", "estimate"),
            chance_form=run.get("chance_form", "linear"), fps_method=method, max_rows=max_rows,
            notes=dict(raw.get("notes", {}) or {}),
        )
    except ScenarioError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ScenarioError(f"invalid scenario: {exc}") from exc


def load_scenario(path) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    return scenario_from_dict(raw)


def default_scenario() -> ScenarioConfig:
    """The packaged single-input benchmark scenario."""
    text = resources.files("adaptive_smpc").joinpath("scenarios/benchmark.yaml").read_text("utf-8")
    return scenario_from_dict(yaml.safe_load(text))


# --------------------------------------------------------------------------
# disturbances
# --------------------------------------------------------------------------

def generate_disturbance(seed: int, n_steps: int, spec: DisturbanceSpec) -> np.ndarray:
    """i.i.d. zero-mean samples inside ``[-w_bar, w_bar]``, shape (n_steps, n_y)."""
    rng = np.random.default_rng(seed)
    bound = spec.bound
    if not np.any(bound):
        return np.zeros((n_steps, bound.size))
    if spec.family == "uniform":
        return rng.uniform(-1.0, 1.0, size=(n_steps, bound.size)) * bound
    scale = spec.scale if spec.scale is not None else 0.5
    # scale is the pre-truncation std as a fraction of the bound
    lim = 1.0 / scale
    draws = stats.truncnorm.rvs(-lim, lim, size=(n_steps, bound.size), random_state=rng)
    return draws * scale * bound


def disturbance_hash(w: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(w, dtype="<f8").tobytes()).hexdigest()


# --------------------------------------------------------------------------
# closed loop
# --------------------------------------------------------------------------

@dataclass(eq=False)
class RunTrace:
    """Per-step record of one run; ``columns`` maps names to equal-length arrays."""

    columns: dict
    status: list
    seed: int
    mode: str
    outcome: str
    disturbance_sha256: str
    n_y: int = 1
    n_u: int = 1
    n_params: int = 1

    def __len__(self) -> int:
        return len(self.status)

    def col(self, name: str) -> np.ndarray:
        return self.columns[name]

    def block(self, prefix: str) -> np.ndarray:
        names = [k for k in self.columns if k.startswith(prefix + "_")]
        return np.column_stack([self.columns[k] for k in names]) if names else np.zeros((len(self), 0))

    @property
    def completed(self) -> bool:
        return self.outcome == "ok"

    @property
    def total_cost(self) -> float:
        return float(np.sum(self.columns["stage_cost"]))

    @property
    def violations(self) -> np.ndarray:
        return self.columns["violation"].astype(bool)


def trace_columns(dims: FirDims) -> list[str]:
    cols = ["t"]
    cols += [f"u_{i}" for i in range(dims.n_u)]
    cols += [f"y_{i}" for i in range(dims.n_y)]
    cols += [f"w_{i}" for i in range(dims.n_y)]
    cols += ["stage_cost", "objective", "fps_rows", "fps_vertices", "fps_volume"]
    cols += [f"mu_{i}" for i in range(dims.n_params)]
    cols += [f"cheb_{i}" for i in range(dims.n_params)]
    cols += ["violation", "truth_in_fps", "fps_monotone", "witness_residual"]
    return cols


_INT_COLUMNS = {"t", "fps_rows", "fps_vertices", "violation", "truth_in_fps", "fps_monotone"}


def _vertices_inside(verts_new, prev: fpsmod.FeasibleParamSet, tol: float = poly.FEAS_TOL) -> bool:
    for j, row in enumerate(prev.rows):
        if np.any(row.a_mat @ verts_new[j].T > row.b_vec[:, None] + tol):
            return False
    return True


class _Plant:
    """Estimator state plus the set; advanced one measurement at a time."""

    def __init__(self, cfg: ScenarioConfig):
        d = cfg.dims
        self.cfg = cfg
        self.fps = fpsmod.init_fps(cfg.fps_init, d, cfg.disturbance.bound)
        self.est = rls.ModelEstimate(cfg.estimator.mean0, cfg.estimator.cov0, cfg.disturbance.variance)
        self.mu_ctrl = self.est.mean.copy()
        self.monotone = True

    def measure(self, phi, y) -> Optional[str]:
        """Fold in one measurement; returns the failure outcome, or None."""
        cfg = self.cfg
        prev = self.fps
        try:
            self.fps = fpsmod.update_fps(prev, phi, y, method=cfg.fps_method, max_rows=cfg.max_rows)
        except fpsmod.ModelInconsistencyError as exc:
            logger.info("%s", exc)
            return "model_inconsistency"
        self.monotone = _vertices_inside(self.fps.row_vertices(), prev)
        blk = rls.build_block_regressor(phi, cfg.dims.n_y)
        try:
            self.est = rls.rls_update(self.est, blk, y, joseph=cfg.estimator.joseph)
            self.mu_ctrl = rls.project_estimate(self.est, self.fps)
        except rls.EstimatorError as exc:
            logger.warning("estimator: %s", exc)
            return "solver_failure"
        if cfg.estimator.feed_projection:
            self.est = rls.ModelEstimate(self.mu_ctrl, self.est.covariance, self.est.noise_var)
        return None


def build_program(cfg: ScenarioConfig, phi, y, plant: _Plant, cheb: np.ndarray) -> mpc.ConicProgram:
    d = cfg.dims
    verts = fpsmod.fps_vertices(plant.fps)
    if cfg.mode == "robust":
        return mpc.assemble_robust(phi, y, cheb, verts, cfg.disturbance.bound, cfg.chance, cfg.mpc, d)
    nominal = rls.mean_as_matrix(plant.mu_ctrl, d) if cfg.nominal == "estimate" else cheb
    gamma = build_gamma(cfg.chance, cfg.disturbance.variance, d)
    return mpc.assemble_stochastic(phi, y, nominal, verts, cfg.chance, gamma, cfg.mpc, d,
                                   cone_form=cfg.chance_form == "cone")


def run_closed_loop(cfg: ScenarioConfig, seed: int, mode: Optional[str] = None) -> RunTrace:
    """Simulate ``steps + 1`` receding-horizon steps against the true plant.

    A failed solve ends the run early; ``outcome`` is then
    ``"infeasible_at_start"`` (t = 0) or ``"solver_failure"``.
    """
    if mode is not None and mode != cfg.mode:
        cfg = cfg.with_mode(mode)
    d = cfg.dims
    n_steps = cfg.steps
    w = generate_disturbance(seed, n_steps + 1, cfg.disturbance)
    cols = {name: [] for name in trace_columns(d)}
    statuses: list[str] = []
    q, s = cfg.mpc.q_weight, cfg.mpc.s_weight
    e_row, p = cfg.chance.e_row, cfg.chance.p

    phi = cfg.phi0.copy()
    y = simulate_output(cfg.true_model, phi, w[0])
    plant = _Plant(cfg)
    outcome = "ok"
    prev_sol: Optional[mpc.MpcSolution] = None
    failure = plant.measure(phi, y)
    if failure:
        outcome = failure
        n_steps = -1

    for t in range(n_steps + 1):
        cheb = fpsmod.fps_chebyshev_center(plant.fps)
        prog = build_program(cfg, phi, y, plant, cheb)
        witness = math.nan
        if prev_sol is not None:
            witness = mpc.constraint_residual(prog, mpc.shifted_candidate(prev_sol).ravel())
        sol = mpc.solve(prog)
        statuses.append(sol.status.value)
        if not sol.ok:
            outcome = "infeasible_at_start" if t == 0 else "solver_failure"
            logger.info("seed %d mode %s: %s at t=%d", seed, cfg.mode, sol.status.value, t)
            statuses.pop()
            break
        u = mpc.first_input(sol)
        verts = plant.fps.row_vertices()
        row = {
            "t": t,
            "stage_cost": float(y @ q @ y + u @ s @ u),
            "objective": sol.objective,
            "fps_rows": int(sum(plant.fps.row_counts)),
            "fps_vertices": int(np.prod([len(v) for v in verts])),
            "fps_volume": fpsmod.fps_volume(plant.fps),
            "violation": int(e_row @ y > p),
            "truth_in_fps": int(fpsmod.fps_contains(plant.fps, cfg.true_model)),
            "fps_monotone": int(plant.monotone),
            "witness_residual": witness,
        }
        row.update({f"u_{i}": u[i] for i in range(d.n_u)})
        row.update({f"y_{i}": y[i] for i in range(d.n_y)})
        row.update({f"w_{i}": w[t, i] for i in range(d.n_y)})
        row.update({f"mu_{i}": plant.mu_ctrl[i] for i in range(d.n_params)})
        flat_cheb = cheb.ravel()
        row.update({f"cheb_{i}": flat_cheb[i] for i in range(d.n_params)})
        for name in cols:
            cols[name].append(row[name])
        if t == n_steps:
            break
        phi = advance_regressor(phi, u, d)
        y = simulate_output(cfg.true_model, phi, w[t + 1])
        failure = plant.measure(phi, y)
        if failure:
            outcome = failure
            break
        prev_sol = sol

    columns = {k: np.asarray(v, dtype=np.int64 if k in _INT_COLUMNS else float) for k, v in cols.items()}
    return RunTrace(columns, statuses, int(seed), cfg.mode, outcome, disturbance_hash(w),
                    d.n_y, d.n_u, d.n_params)


def run_estimation(cfg: ScenarioConfig, seed: int, amplitude: Optional[float] = None) -> RunTrace:
    """Open-loop identification run: random admissible inputs, no controller.

    Inputs are drawn uniformly in ``[-a, a]`` per channel (``a`` defaults to the
    largest box admitted by ``C u <= g``) and then scaled
    down, if needed, to satisfy the input rows.
    """
    d = cfg.dims
    rng = np.random.default_rng([int(seed), 1])
    w = generate_disturbance(seed, cfg.steps + 1, cfg.disturbance)
    c_mat, g_vec = cfg.mpc.c_mat, cfg.mpc.g_vec
    if amplitude is None:
        # largest box [-a, a]^n_u inside {C u <= g}
        row_norm = np.sum(np.abs(c_mat), axis=1)
        active = row_norm > 0
        amplitude = float(np.min(g_vec[active] / row_norm[active])) if np.any(active) else 1.0
    cols = {name: [] for name in trace_columns(d)}
    statuses = []
    q, s = cfg.mpc.q_weight, cfg.mpc.s_weight
    phi = cfg.phi0.copy()
    y = simulate_output(cfg.true_model, phi, w[0])
    plant = _Plant(cfg)
    failure = plant.measure(phi, y)
    outcome = failure or "ok"
    for t in range(cfg.steps + 1 if failure is None else 0):
        u = rng.uniform(-amplitude, amplitude, size=d.n_u)
        lhs = c_mat @ u
        over = np.max(np.where(g_vec > 0, lhs / np.where(g_vec > 0, g_vec, 1.0), 0.0))
        if over > 1.0:
            u = u / over
        cheb = fpsmod.fps_chebyshev_center(plant.fps)
        verts = plant.fps.row_vertices()
        row = {
            "t": t, "stage_cost": float(y @ q @ y + u @ s @ u), "objective": math.nan,
            "fps_rows": int(sum(plant.fps.row_counts)),
            "fps_vertices": int(np.prod([len(v) for v in verts])),
            "fps_volume": fpsmod.fps_volume(plant.fps),
            "violation": int(cfg.chance.e_row @ y > cfg.chance.p),
            "truth_in_fps": int(fpsmod.fps_contains(plant.fps, cfg.true_model)),
            "fps_monotone": int(plant.monotone), "witness_residual": math.nan,
        }
        row.update({f"u_{i}": u[i] for i in range(d.n_u)})
        row.update({f"y_{i}": y[i] for i in range(d.n_y)})
        row.update({f"w_{i}": w[t, i] for i in range(d.n_y)})
        row.update({f"mu_{i}": plant.mu_ctrl[i] for i in range(d.n_params)})
        row.update({f"cheb_{i}": c for i, c in enumerate(cheb.ravel())})
        for name in cols:
            cols[name].append(row[name])
        statuses.append("open_loop")
        if t == cfg.steps:
            break
        phi = advance_regressor(phi, u, d)
        y = simulate_output(cfg.true_model, phi, w[t + 1])
        failure = plant.measure(phi, y)
        if failure:
            outcome = failure
            break
    columns = {k: np.asarray(v, dtype=np.int64 if k in _INT_COLUMNS else float) for k, v in cols.items()}
    return RunTrace(columns, statuses, int(seed), "estimate-only", outcome, disturbance_hash(w),
                    d.n_y, d.n_u, d.n_params)


# --------------------------------------------------------------------------
# Monte Carlo
# --------------------------------------------------------------------------

@dataclass(eq=False)
class ModeSummary:
    mode: str
    seeds: np.ndarray
    costs: np.ndarray
    violation_prob: np.ndarray
    max_violation_prob: float
    failures: int
    infeasible_at_start: int
    witness_max: float
    witness_failures: int
    truth_lost: int
    monotonicity_breaks: int
    initial_error: np.ndarray
    final_error: np.ndarray
    cheb_final_error: np.ndarray
    disturbance_hashes: list

    @property
    def n_runs(self) -> int:
        return int(self.seeds.size)


@dataclass(eq=False)
class MonteCarloSummary:
    n_runs: int
    base_seed: int
    paired: bool
    modes: dict
    stochastic_cheaper_fraction: Optional[float] = None
    hashes_match: Optional[bool] = None


def summarize_mode(traces: list[RunTrace], cfg: ScenarioConfig) -> ModeSummary:
    d = cfg.dims
    h_true = cfg.true_model.ravel()
    n_t = cfg.steps + 1
    hits = np.zeros(n_t)
    seen = np.zeros(n_t)
    costs, init_err, final_err, cheb_err = [], [], [], []
    failures = at_start = witness_fail = lost = breaks = 0
    witness_max = 0.0
    for tr in traces:
        n = len(tr)
        if n:
            hits[:n] += tr.violations
            seen[:n] += 1
            wit = tr.col("witness_residual")[1:]
            if wit.size:
                witness_max = max(witness_max, float(np.nanmax(wit)))
                witness_fail += int(np.sum(wit > WITNESS_TOL))
            lost += int(np.sum(tr.col("truth_in_fps") == 0))
            breaks += int(np.sum(tr.col("fps_monotone") == 0))
        if not tr.completed:
            failures += 1
            at_start += int(tr.outcome == "infeasible_at_start")
            costs.append(math.nan)
            final_err.append(math.nan)
            cheb_err.append(math.nan)
        else:
            costs.append(tr.total_cost)
            final_err.append(float(np.linalg.norm(tr.block("mu")[-1] - h_true)))
            cheb_err.append(float(np.linalg.norm(tr.block("cheb")[-1] - h_true)))
        init_err.append(float(np.linalg.norm(np.asarray(cfg.estimator.mean0) - h_true)))
    prob = np.divide(hits, seen, out=np.zeros(n_t), where=seen > 0)
    return ModeSummary(
        mode=traces[0].mode if traces else cfg.mode,
        seeds=np.array([tr.seed for tr in traces], dtype=np.int64),
        costs=np.asarray(costs), violation_prob=prob,
        max_violation_prob=float(np.max(prob)) if prob.size else 0.0,
        failures=failures, infeasible_at_start=at_start,
        witness_max=witness_max, witness_failures=witness_fail,
        truth_lost=lost, monotonicity_breaks=breaks,
        initial_error=np.asarray(init_err), final_error=np.asarray(final_err),
        cheb_final_error=np.asarray(cheb_err),
        disturbance_hashes=[tr.disturbance_sha256 for tr in traces],
    )


def _run_one(args):
    cfg, seed, mode = args
    return run_closed_loop(cfg, seed, mode)


def run_batch(cfg: ScenarioConfig, seeds, mode: Optional[str] = None, workers: int = 1) -> list[RunTrace]:
    jobs = [(cfg, int(s), mode) for s in seeds]
    if workers <= 1:
        return [_run_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


def run_monte_carlo(cfg: ScenarioConfig, n_runs: int, base_seed: int = 0, *, paired: bool = False,
                    workers: int = 1, keep_traces: bool = False):
    """Independent runs with seeds ``base_seed, base_seed + 1, ...``.

    With ``paired`` both controllers see every seed (and therefore identical
    disturbance sequences). Returns the summary, plus the traces per mode
    when ``keep_traces`` is set.
    """
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    seeds = range(base_seed, base_seed + n_runs)
    modes = ("stochastic", "robust") if paired else (cfg.mode,)
    traces = {m: run_batch(cfg, seeds, m, workers) for m in modes}
    summary = summarize(traces, cfg, base_seed)
    return (summary, traces) if keep_traces else summary


def summarize(traces: dict, cfg: ScenarioConfig, base_seed: int = 0) -> MonteCarloSummary:
    modes = {m: summarize_mode(trs, cfg) for m, trs in traces.items()}
    n_runs = len(next(iter(traces.values())))
    paired = set(modes) == {"stochastic", "robust"}
    frac = match = None
    if paired:
        cs, cr = modes["stochastic"].costs, modes["robust"].costs
        ok = np.isfinite(cs) & np.isfinite(cr)
        frac = float(np.mean(cs[ok] < cr[ok])) if np.any(ok) else math.nan
        match = modes["stochastic"].disturbance_hashes == modes["robust"].disturbance_hashes
    return MonteCarloSummary(n_runs, base_seed, paired, modes, frac, match)


# --------------------------------------------------------------------------
# export / import
# --------------------------------------------------------------------------

def _fmt(value, integer: bool) -> str:
    if integer:
        return str(int(value))
    return repr(float(value))


def export_trace(trace: RunTrace, path) -> Path:
    """Write one CSV row per step after a ``#``-prefixed metadata line."""
    if not str(path):
        raise ValueError("empty output path")
    path = Path(path)
    names = list(trace.columns)
    meta = (f"# adaptive-smpc trace v{TRACE_VERSION} seed={trace.seed} mode={trace.mode} "
            f"outcome={trace.outcome} n_y={trace.n_y} n_u={trace.n_u} n_params={trace.n_params} "
            f"disturbance_sha256={trace.disturbance_sha256}")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(meta + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names + ["status"])
        for i in range(len(trace)):
            writer.writerow([_fmt(trace.columns[n][i], n in _INT_COLUMNS) for n in names]
                            + [trace.status[i]])
    return path


def read_trace(path) -> RunTrace:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        meta_line = fh.readline().strip()
        if not meta_line.startswith("# adaptive-smpc trace"):
            raise ValueError(f"{path}: not a trace file")
        meta = dict(item.split("=", 1) for item in meta_line.split()[4:])
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    names = header[:-1]
    columns = {}
    for k, name in enumerate(names):
        dtype = np.int64 if name in _INT_COLUMNS else float
        columns[name] = np.asarray([r[k] for r in rows], dtype=float).astype(dtype)
    return RunTrace(columns, [r[-1] for r in rows], int(meta["seed"]), meta["mode"], meta["outcome"],
                    meta["disturbance_sha256"], int(meta["n_y"]), int(meta["n_u"]), int(meta["n_params"]))


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    return obj


def summary_to_dict(summary: MonteCarloSummary) -> dict:
    modes = {name: {k: _jsonable(getattr(ms, k)) for k in ModeSummary.__dataclass_fields__}
             for name, ms in summary.modes.items()}
    return {
        "version": SUMMARY_VERSION,
        "n_runs": summary.n_runs,
        "base_seed": summary.base_seed,
        "paired": summary.paired,
        "stochastic_cheaper_fraction": _jsonable(summary.stochastic_cheaper_fraction),
        "hashes_match": summary.hashes_match,
        "modes": modes,
    }


def export_summary(summary: MonteCarloSummary, path) -> Path:
    if not str(path):
        raise ValueError("empty output path")
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(summary_to_dict(summary), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def read_summary(path) -> MonteCarloSummary:
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)

    def arr(v):
        return np.asarray([math.nan if x is None else x for x in v], dtype=float)

    modes = {}
    for name, d in raw["modes"].items():
        modes[name] = ModeSummary(
            mode=d["mode"], seeds=np.asarray(d["seeds"], dtype=np.int64), costs=arr(d["costs"]),
            violation_prob=arr(d["violation_prob"]), max_violation_prob=d["max_violation_prob"],
            failures=d["failures"], infeasible_at_start=d["infeasible_at_start"],
            witness_max=d["witness_max"], witness_failures=d["witness_failures"],
            truth_lost=d["truth_lost"], monotonicity_breaks=d["monotonicity_breaks"],
            initial_error=arr(d["initial_error"]), final_error=arr(d["final_error"]),
            cheb_final_error=arr(d["cheb_final_error"]),
            disturbance_hashes=list(d["disturbance_hashes"]),
        )
    return MonteCarloSummary(raw["n_runs"], raw["base_seed"], raw["paired"], modes,
                             raw["stochastic_cheaper_fraction"], raw["hashes_match"])
