"""Command-line driver: ``adaptive-smpc {run,montecarlo,compare,estimate-only}``.

Exit status is 0 on success, 2 for a bad scenario or arguments and 3 when
a run ends in solver failure, infeasibility or model inconsistency.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import sim

EXIT_OK = 0
EXIT_SCENARIO = 2
EXIT_RUN_FAILED = 3


def _config(path) -> sim.ScenarioConfig:
    return sim.default_scenario() if path is None else sim.load_scenario(path)


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_run(args) -> int:
    cfg = _config(args.config)
    mode = args.mode or cfg.mode
    trace = sim.run_closed_loop(cfg, args.seed, mode)
    out = _out_dir(args.out)
    path = sim.export_trace(trace, out / f"trace_{mode}_seed{args.seed}.csv")
    print(f"{mode} seed={args.seed} outcome={trace.outcome} steps={len(trace)} "
          f"cost={trace.total_cost:.6g} violations={int(trace.violations.sum())} -> {path}")
    return EXIT_OK if trace.completed else EXIT_RUN_FAILED


def _print_mode(ms: sim.ModeSummary) -> None:
    costs = ms.costs[np.isfinite(ms.costs)]
    mean_cost = float(costs.mean()) if costs.size else float("nan")
    print(f"  {ms.mode:<10} runs={ms.n_runs} failures={ms.failures} mean_cost={mean_cost:.6g} "
          f"max_violation_prob={ms.max_violation_prob:.4f} witness_max={ms.witness_max:.3g}")


def _monte_carlo(args, paired: bool) -> int:
    cfg = _config(args.config)
    n_runs = 10_000 if args.full else args.runs
    summary, traces = sim.run_monte_carlo(cfg, n_runs, args.base_seed, paired=paired,
                                          workers=args.workers, keep_traces=True)
    out = _out_dir(args.out)
    path = sim.export_summary(summary, out / "summary.json")
    if args.traces:
        for mode, trs in traces.items():
            for tr in trs:
                sim.export_trace(tr, out / f"trace_{mode}_seed{tr.seed}.csv")
    print(f"runs={summary.n_runs} base_seed={summary.base_seed} paired={summary.paired} -> {path}")
    for ms in summary.modes.values():
        _print_mode(ms)
    if summary.paired:
        cs, cr = summary.modes["stochastic"].costs, summary.modes["robust"].costs
        ok = np.isfinite(cs) & np.isfinite(cr)
        diff = cs[ok] - cr[ok]
        print(f"  paired: stochastic cheaper in {summary.stochastic_cheaper_fraction:.3f} of seeds, "
              f"mean cost difference {float(diff.mean()) if diff.size else float('nan'):.6g}, "
              f"disturbances identical={summary.hashes_match}")
    failed = any(ms.failures for ms in summary.modes.values())
    return EXIT_RUN_FAILED if failed else EXIT_OK


def _cmd_montecarlo(args) -> int:
    return _monte_carlo(args, args.paired)


def _cmd_compare(args) -> int:
    return _monte_carlo(args, True)


def _cmd_estimate(args) -> int:
    cfg = _config(args.config)
    trace = sim.run_estimation(cfg, args.seed, args.amplitude)
    out = _out_dir(args.out)
    path = sim.export_trace(trace, out / f"estimate_seed{args.seed}.csv")
    h_true = cfg.true_model.ravel()
    err = np.linalg.norm(trace.block("mu")[-1] - h_true)
    cerr = np.linalg.norm(trace.block("cheb")[-1] - h_true)
    print(f"estimate-only seed={args.seed} outcome={trace.outcome} steps={len(trace)} "
          f"rls_error={err:.4g} center_error={cerr:.4g} -> {path}")
    return EXIT_OK if trace.completed else EXIT_RUN_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adaptive-smpc", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log solver warnings")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=True):
        p.add_argument("--config", type=Path, default=None,
                       help="scenario YAML (default: bundled benchmark)")
        p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        if seed:
            p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("run", help="single closed-loop run, writes a CSV trace")
    common(p)
    p.add_argument("--mode", choices=("stochastic", "robust"), default=None)
    p.set_defaults(func=_cmd_run)

    for name, func, helptext in (
        ("montecarlo", _cmd_montecarlo, "seeded batch of closed-loop runs"),
        ("compare", _cmd_compare, "paired stochastic vs robust costs on shared seeds"),
    ):
        p = sub.add_parser(name, help=helptext)
        common(p, seed=False)
        p.add_argument("--runs", type=int, default=100)
        p.add_argument("--full", action="store_true", help="use 10000 runs")
        p.add_argument("--base-seed", type=int, default=0)
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--traces", action="store_true", help="also write every trace")
        if name == "montecarlo":
            p.add_argument("--paired", action="store_true", help="run both modes on each seed")
        p.set_defaults(func=func)

    p = sub.add_parser("estimate-only", help="set and estimator evolution under random inputs")
    common(p)
    p.add_argument("--amplitude", type=float, default=None, help="input amplitude (default: input bound)")
    p.set_defaults(func=_cmd_estimate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (sim.ScenarioError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCENARIO


if __name__ == "__main__":
    sys.exit(main())
