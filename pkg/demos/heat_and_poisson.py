"""Heat and Poisson kernels on H1, with two independent cross-checks.

Run:  python demos/heat_and_poisson.py
"""
import numpy as np

from heisenkit.grids import Box3
from heisenkit.kernels import PoissonKernel, decay_slope, default_heat_kernel, heat_flow_fd, heat_kernel

heat = default_heat_kernel()

# Mass and homogeneity of h(t, .) on a box that holds the kernel
box = Box3((-8, -8, -24), (8, 8, 24), (48, 48, 96))
tab = heat_kernel([0.25, 0.5, 1.0], box, heat=heat)
print("heat mass defect per t:", np.array2string(tab.mass_defect, precision=2))
print("homogeneity residual:  ", tab.homogeneity_residual)

# An explicit finite-difference heat flow, started from h(0.2) and run to t = 0.3,
# should approach the tabulated h(0.3) at second order in the mesh width
for n in (17, 25, 33):
    r = heat_flow_fd(Box3((-2, -2, -3), (2, 2, 3), (n, n, n)), 0.2, 0.3, heat)
    print(f"FD heat flow n={n:2d}: relative error {r.relative_error:.4f} ({r.steps} steps)")

# Poisson kernel: unit mass and the far-field decay exponent -(4 + 2s)
for s in (0.25, 0.5, 0.75):
    K = PoissonKernel(s, heat)
    print(f"s={s}: mass {K.mass()['mass']:.8f}, decay slope {decay_slope(s, heat=heat):+.3f} "
          f"(expected {-(4 + 2 * s):+.2f})")
