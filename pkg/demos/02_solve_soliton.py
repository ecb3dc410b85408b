"""
Solving H + F_perp = 0 with Dirichlet data
==========================================

Pseudo-time relaxation recovers the hemisphere on a small square from a
perturbed start, and produces a nonplanar soliton patch from saddle data.
"""

# %%
import numpy as np

from mcflab import GridSpec, build_field
from mcflab.analysis import estimate_K
from mcflab.fixtures import bump, shrinking_sphere
from mcflab.soliton import SolverConfig, solve_dirichlet

exact = shrinking_sphere(2)
for h in (1 / 16, 1 / 32):
    spec = GridSpec(2, 1, 0.75, h)
    f, rep = solve_dirichlet(spec, exact, lambda X: exact(X) + bump(0.014, 0.5)(X), SolverConfig(eps=1e-8))
    err = np.abs(f.values - build_field(spec, exact, vectorized=True).values).max()
    print(f"h = 1/{round(1 / h)}: {rep.iterations} iterations, max error {err:.2e} (10 h^2 = {10 * h * h:.2e})")

# %%
# Saddle-shaped boundary data.  The solution is a genuine soliton patch, not
# a plane, so the weighted curvature integral is positive but small.
saddle = lambda X: (0.3 * X[:, 0] + 0.25 * (X[:, 0] ** 2 - X[:, 1] ** 2))[:, None]
f, rep = solve_dirichlet(GridSpec(2, 1, 1.0, 1 / 16), saddle, None, SolverConfig(eps=1e-5))
print("converged:", rep.converged, "after", rep.iterations, "iterations")
for row in estimate_K(f, [0.25, 0.5, 0.75]).rows:
    print(f"R = {row['param']:.2f}   LHS = {row['lhs']:.3e}   sphere term = {row['rhs']:.3f}")
