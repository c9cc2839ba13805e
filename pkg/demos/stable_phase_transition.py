"""Allen-Cahn on the extended half-space: descent, stability, and the
geometric inequality evaluated on the computed solution.

Run:  python demos/stable_phase_transition.py   (about 15 s)
"""
import numpy as np

from heisenkit.extension import (CompactBump, ExtensionProblem, energy_descent, random_direction, stability_scan,
                                 weak_residual_terms)
from heisenkit.grids import Box4
from heisenkit.rigidity import BallRule, geometric_inequality_report, weighted_energy

box = Box4((-1.5, -1.5, -2, 0), (1.5, 1.5, 2, 1.5), (17, 17, 17, 12))
prob = ExtensionProblem(box, s=0.5, nonlinearity="allen_cahn", boundary_data="tanh(2*x1 + x2*x3)")
u, info = energy_descent(prob, return_info=True)
print(f"{info.method}: {info.iterations} descent steps, residual {info.residual:.1e}, "
      f"energy {info.energy_trace[0]:.4f} -> {info.energy_trace[-1]:.4f}")

rep = stability_scan(u, prob.a, "allen_cahn", n_directions=100, seed=0)
print(f"second variation over 100 random bumps: min Q/norm = {rep.min_normalized:.3f} (stable: {rep.stable})")

rng = np.random.default_rng(4)
for _ in range(3):
    t = weak_residual_terms(u, random_direction(box, rng), prob.a, "allen_cahn")
    print(f"weak residual {t['residual']:+.2e}  (scale {t['scale']:.2e})")

phi = CompactBump((0, 0, 0, 0), (0.9, 0.9, 1.2, 0.9), k=4)
ineq = geometric_inequality_report(u, phi, prob.a)
d = ineq.as_dict()
print(f"inequality: lhs {d['lhs']:.4f} >= rhs {d['rhs_hessian_form']:.4f}  (margin/scale {d['margin'] / d['scale']:.3f})")
print(f"  Hessian and curvature forms differ by {d['forms_difference']:.2e}")
print(f"  <T nu, v>: min {d['tnu_v']['min']:.3f}, max {d['tnu_v']['max']:.3f}, "
      f"nonnegative at {100 * d['tnu_v']['fraction_nonnegative']:.0f}% of nodes")

tau = np.geomspace(0.1, BallRule(u.grid, prob.a).max_tau, 8)
prof = weighted_energy(u, prob.a, tau)
for t, e in zip(prof.tau, prof.eta):
    print(f"  eta({t:.3f}) = {e:.4e}")
