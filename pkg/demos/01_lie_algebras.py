"""
Structure constants, metrics and the commutator bound
=====================================================

Builds u(1)^3, su(2) and su(3), checks the invariant metric against the
negative Killing form and estimates the best constant in |[X,Y]| <= C|X||Y|.
"""
import numpy as np

from covlap import lie_algebra as la

for alg in (la.u1(3), la.su2(), la.su3()):
    # for semisimple algebras the metric is the negative Killing form
    print(f"{alg.name:5s} dim={alg.dim}  metric eigenvalues in", la.metric_eigenvalue_bounds(alg))
    print("       commutator constant C =", round(la.commutator_bound_constant(alg), 8))

su2 = la.su2()
X, Y = su2.basis(0), su2.basis(1)
print("[e1, e2] =", np.asarray(la.bracket(su2, X, Y)))

# random check of ad-invariance: ([X,Y],Z) + (Y,[X,Z]) = 0
rng = np.random.default_rng(0)
X, Y, Z = (rng.standard_normal((1000, 8)) for _ in range(3))
su3 = la.su3()
res = la.inner(su3, la.bracket(su3, X, Y), Z) + la.inner(su3, Y, la.bracket(su3, X, Z))
print("su3 ad-invariance residual:", np.abs(res).max())
