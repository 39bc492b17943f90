"""
Galerkin systems and solution splits
====================================

Projects the weak form onto a few bump functions, then uses the asymptotic
split Z = Y + Z0 and the Gauss-law split E = -grad(A) Phi.
"""
import numpy as np

from covlap import grid_fields as gf
from covlap import lie_algebra as la
from covlap import solver

su2 = la.su2()
g = gf.Grid3(2.0, 17)
A = gf.GaussianPotential.random(su2, 2.0, seed=8)(g)
F = gf.sample_bump(g, su2, (0, 0, 0), 1.5, (1, 0, 0))

basis = solver.bump_basis(g, su2, count=6, seed=1)
for sigma in (1.0, 0.5):
    a, system = solver.galerkin_solve(A, F, sigma, basis)
    print(f"sigma={sigma}: coefficients {np.round(a, 4)}")
    print("          conditioning", system.conditioning)

# a constant far-field value carried by Z0
Z0 = gf.ScalarField.constant(g, su2, [0.1, 0.0, 0.0])
Z, rep = solver.asymptotic_split_solve(A, F, Z0, tol=1e-10, sigma=0.5)
print("split: iterations", rep.iterations, "correction norm", rep.diagnostics["correction_norm"])

Phi, E, rep = solver.gauss_law_split(A, F, tol=1e-10)
print("Gauss law divergence residual:", rep.diagnostics["divergence_residual"])
