"""Where is the quantum violation largest?

With coplanar directions the closed-form LHS is
|cos 2a - cos 2(a+b)| + cos 2b for a = theta_ab, b = theta_bc. A coarse grid
plus coordinate descent locates the maximum of 3/2 at a = b = pi/6 (and its
three symmetry twins).
"""
import math

import numpy as np

from lglab import maximize_violation, quantum_lhs

# a quick look at the landscape along the diagonal a = b
print("theta (deg)   LHS on the diagonal")
for deg in range(0, 91, 10):
    theta = math.radians(deg)
    print(f"   {deg:3d}        {quantum_lhs(theta, theta):+.4f}")

theta_ab, theta_bc, lhs_max = maximize_violation(grid_step=math.pi / 64, refine_tolerance=1e-9)
print(f"\noptimizer: theta_ab = {theta_ab:.8f}, theta_bc = {theta_bc:.8f}")
print(f"           pi/6     = {math.pi / 6:.8f}")
print(f"maximal LHS = {lhs_max}  (bound for deterministic models: 1)")

# sanity: a dense scan never exceeds the optimum
axis = np.linspace(0, math.pi, 1000, endpoint=False)
a, b = np.meshgrid(axis, axis, indexing="ij")
dense_max = float((np.abs(np.cos(2 * a) - np.cos(2 * (a + b))) + np.cos(2 * b)).max())
print(f"dense 1000x1000 scan max = {dense_max:.8f} <= {lhs_max:.8f}")
