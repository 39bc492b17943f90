"""
Empirical constants for the weighted inequalities
=================================================

Runs the inequality lab on the reference family (su(2), n=33) and prints the
observed constants. Stability checks re-run on n=65, so this takes about
half a minute.
"""
from covlap import grid_fields as gf
from covlap import inequality_lab as lab
from covlap import lie_algebra as la

su2 = la.su2()
pot = gf.GaussianPotential.random(su2, 3.0, seed=7, count=2, amplitude=0.5)
family = lab.reference_family()
sigma = 0.5

reports = [
    lab.check_poincare(pot, sigma, family),
    lab.check_coercivity(pot, sigma, family),
    lab.check_boundedness(pot, sigma, family),
    lab.check_apriori(pot, sigma, 2, family),
    lab.check_embedding(pot, sigma, 2, family),
    lab.ginibre_velo_check(family, 0.01, pot),
    lab.gurka_opic_check(sigma),
    lab.gurka_opic_check(0.0),
]
for rep in reports:
    extra = rep.details.get("variation")
    extra = "" if extra is None else f"  refinement variation {extra:.3f}"
    print(f"{rep.name:14s} {'pass' if rep.passed else 'FAIL'}  constant {rep.empirical_constant:.6g}{extra}")

# the Hardy case: sigma = 1, no potential, centered bumps; the sharp constant is 2
hardy = lab.TestFamily(gf.Grid3(3.0, 33), la.u1(), samples=8, seed=3, centered=True, radius=(0.15, 0.8))
print("Hardy ratio", lab.check_poincare(None, 1.0, hardy, refine=False).empirical_constant)
