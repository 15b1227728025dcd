"""Set-membership and least-squares identification without a controller.

Random inputs inside the admissible range drive the plant. Every
measurement cuts the admissible-model set with two halfspaces and updates a
Gaussian estimate, which is then projected back into the set.

    python3 demos/estimation.py [seed]
"""
import sys

import numpy as np

from adaptive_smpc import sim

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
cfg = sim.default_scenario()
trace = sim.run_estimation(cfg, seed)
h_true = cfg.true_model.ravel()

err_mu = np.linalg.norm(trace.block("mu") - h_true, axis=1)
err_cc = np.linalg.norm(trace.block("cheb") - h_true, axis=1)
print(f"{'t':>3} {'rows':>5} {'verts':>6} {'volume':>10} {'|mu - H|':>9} {'|cc - H|':>9}")
for k in range(len(trace)):
    print(f"{k:3d} {trace.col('fps_rows')[k]:5d} {trace.col('fps_vertices')[k]:6d} "
          f"{trace.col('fps_volume')[k]:10.3g} {err_mu[k]:9.4f} {err_cc[k]:9.4f}")
print("final estimate:", np.round(trace.block("mu")[-1], 3), " true:", h_true)

# With exciting inputs the estimate converges; under closed-loop regulation the
# input decays and the same estimator learns far less.
closed = sim.run_closed_loop(cfg, seed)
print("closed-loop final error: estimate %.3f, center %.3f" % (
    np.linalg.norm(closed.block("mu")[-1] - h_true), np.linalg.norm(closed.block("cheb")[-1] - h_true)))
