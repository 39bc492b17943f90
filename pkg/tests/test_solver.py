import json

import numpy as np
import pytest
import scipy.linalg

from covlap import errors
from covlap import grid_fields as gf
from covlap import lie_algebra as la
from covlap import solver

import oracles

SU2 = la.su2()
TOL = 1e-10


def rel_l2(Z, ref):
    w = Z.grid.trapezoid_weights
    return np.sqrt(np.sum(w * (Z - ref).magnitude() ** 2) / np.sum(w * ref.magnitude() ** 2))


@pytest.fixture(scope="module")
def su2_problem():
    return solver.manufactured_problem(gf.Grid3(3.0, 17), SU2, seed=11)


def test_grid_too_small():
    with pytest.raises(errors.GridTooSmall):
        solver.assemble_operator(None, gf.Grid3(1.0, 4), SU2)


def test_center_row_matches_composed_stencil_oracle():
    g = gf.Grid3(1.0, 5)
    op = solver.assemble_operator(None, g, la.u1())
    e = np.zeros(op.shape)
    e[1, 1, 1, 0] = 1.0
    row = op.apply(e)[..., 0].ravel()
    M = -oracles.scalar_dirichlet_matrix(5, g.spacing).toarray()
    np.testing.assert_allclose(row, M[13], atol=1e-12)
    assert row[13] == pytest.approx(3.0 / (2.0 * g.spacing**2))


def test_abelian_operator_equals_sparse_oracle_matrix():
    g = gf.Grid3(1.0, 7)
    op = solver.assemble_operator(None, g, la.u1())
    M = -oracles.scalar_dirichlet_matrix(7, g.spacing).toarray()
    cols = np.stack([op.apply(np.eye(125)[j].reshape(op.shape)).ravel() for j in range(125)], axis=1)
    np.testing.assert_allclose(cols, M, atol=1e-10)


def test_operator_symmetric_positive_definite_in_h_product():
    g = gf.Grid3(1.5, 7)
    rng = np.random.default_rng(0)
    A = gf.VectorField.from_array(g, SU2, rng.standard_normal((3,) + g.shape + (3,)))
    op = solver.assemble_operator(A)
    for _ in range(100):
        u, v = rng.standard_normal(op.shape), rng.standard_normal(op.shape)
        a, b = op.inner(u, op.apply(v)), op.inner(op.apply(u), v)
        assert abs(a - b) <= 1e-10 * max(abs(a), 1.0)
        assert op.inner(u, op.apply(u)) > 0


def test_zero_source_returns_zero_without_iterating():
    g = gf.Grid3(1.0, 9)
    Z, rep = solver.solve_poisson(None, gf.ScalarField.zeros(g, SU2))
    assert rep.iterations == 0 and np.all(Z.data == 0)


@pytest.mark.parametrize("alg", [la.u1(2), SU2], ids=["u1^2", "su2"])
def test_discrete_manufactured_problem_is_recovered(alg):
    prob = solver.manufactured_problem(gf.Grid3(3.0, 17), alg, seed=2)
    Z, rep = solver.solve_poisson(prob.A, prob.F, TOL)
    assert rep.final_residual <= TOL
    assert rel_l2(Z, prob.Z_exact) <= 10 * TOL
    assert rep.history[-1] <= rep.history[0]
    assert solver.residual(prob.A, Z, prob.F) <= TOL


def test_manufactured_problem_is_deterministic():
    g = gf.Grid3(3.0, 9)
    a = solver.manufactured_problem(g, SU2, 5, "analytic")
    b = solver.manufactured_problem(g, SU2, 5, "analytic")
    for x, y in zip((a.A.data, a.Z_exact.data, a.F.data), (b.A.data, b.Z_exact.data, b.F.data)):
        assert x.tobytes() == y.tobytes()
    with pytest.raises(ValueError):
        solver.manufactured_problem(g, SU2, 5, "symbolic")


def test_abelian_solve_matches_sparse_scalar_oracle():
    g = gf.Grid3(2.0, 13)
    alg = la.u1(2)
    F = gf.sample_bump(g, alg, (0.2, -0.1, 0), 1.5, (1.0, -0.5))
    Z, _ = solver.solve_poisson(gf.GaussianPotential.random(alg, 2.0, 3)(g), F, 1e-13)
    for a in range(2):
        ref = oracles.scalar_poisson_solve(F.data[..., a], g.spacing)
        assert np.abs(Z.data[..., a] - ref).max() <= 1e-10 * max(1.0, np.abs(ref).max())


def test_linearity(su2_problem):
    A, F1 = su2_problem.A, su2_problem.F
    F2 = gf.sample_bump(F1.grid, SU2, (0, 0.5, 0), 1.5, (0, 1, 1))
    Z1, _ = solver.solve_poisson(A, F1, 1e-12)
    Z2, _ = solver.solve_poisson(A, F2, 1e-12)
    Z12, _ = solver.solve_poisson(A, F1 * 2.0 - F2 * 0.5, 1e-12)
    assert rel_l2(Z12, Z1 * 2.0 - Z2 * 0.5) <= 10 * TOL


def test_gauge_equivariance(su2_problem):
    A, F = su2_problem.A, su2_problem.F
    Z, _ = solver.solve_poisson(A, F, 1e-12)
    R = scipy.linalg.expm(la.ad_matrix(SU2, np.array([0.7, -1.2, 0.4])))
    ZR, _ = solver.solve_poisson(A.rotated(R), F.rotated(R), 1e-12)
    assert rel_l2(ZR, Z.rotated(R)) <= 10 * TOL


def test_max_iterations_carries_best_iterate(su2_problem):
    with pytest.raises(errors.MaxIterationsExceeded) as exc:
        solver.solve_poisson(su2_problem.A, su2_problem.F, TOL, max_iter=3)
    assert exc.value.report.iterations == 3
    assert exc.value.field.grid == su2_problem.F.grid
    Z, rep = solver.solve_poisson(su2_problem.A, su2_problem.F, TOL, max_iter=3, raise_on_failure=False)
    assert not rep.converged and rep.final_residual > TOL


def test_jacobi_preconditioner_converges(su2_problem):
    Z, rep = solver.solve_poisson(su2_problem.A, su2_problem.F, TOL, preconditioner="jacobi")
    assert rel_l2(Z, su2_problem.Z_exact) <= 10 * TOL


def test_report_json_and_diagnostics(su2_problem):
    _, rep = solver.solve_poisson(su2_problem.A, su2_problem.F, TOL, sigma=0.5)
    d = json.loads(rep.to_json())
    assert {"iterations", "final_residual", "tolerance", "wall_time_s", "boundary_magnitude"} <= set(d)
    assert d["diagnostics"]["source_condition_norm"] > 0


def test_grid_mismatch(su2_problem):
    with pytest.raises(errors.GridMismatch):
        solver.solve_poisson(su2_problem.A, gf.ScalarField.zeros(gf.Grid3(3.0, 9), SU2))


# Galerkin system

@pytest.fixture(scope="module")
def small():
    g = gf.Grid3(2.0, 13)
    A = gf.GaussianPotential.random(SU2, 2.0, 8)(g)
    F = gf.sample_bump(g, SU2, (0, 0, 0), 1.5, (1, 0, 0))
    return g, A, F


def test_galerkin_sigma_one_is_fourier_series(small):
    g, A, F = small
    basis = solver.bump_basis(g, SU2, 5, seed=1)
    a, system = solver.galerkin_solve(A, F, 1.0, basis)
    np.testing.assert_array_equal(system.matrix, np.eye(5))
    for an, q in zip(a, system.basis):
        assert an == pytest.approx(-np.sum(g.trapezoid_weights * np.einsum("...a,ab,...b->...", F.data, SU2.h, q.data)))


def test_galerkin_drift_present_for_sigma_below_one(small):
    g, A, F = small
    a, system = solver.galerkin_solve(A, F, 0.5, solver.bump_basis(g, SU2, 4, seed=1))
    assert system.matrix.shape == (4, 4)
    assert np.abs(system.matrix - np.eye(4)).max() > 1e-6
    np.testing.assert_allclose(system.matrix @ a, system.rhs, atol=1e-12)
    assert system.conditioning["min_relative_pivot"] > 0


def test_galerkin_zero_source(small):
    g, A, _ = small
    a, _ = solver.galerkin_solve(A, gf.ScalarField.zeros(g, SU2), 0.5, solver.bump_basis(g, SU2, 3))
    assert np.all(a == 0)


def test_galerkin_one_dimensional_projection_approaches_solution():
    # the weak form uses trapezoid sums and one-sided boundary gradients, so the
    # projection of the discrete solution onto itself is exact only as h -> 0
    errs = []
    for n in (13, 25):
        g = gf.Grid3(2.0, n)
        A = gf.GaussianPotential.random(SU2, 2.0, 8)(g)
        F = gf.sample_bump(g, SU2, (0, 0, 0), 1.0, (1, 0, 0))
        Z, _ = solver.solve_poisson(A, F, 1e-12)
        _, system = solver.galerkin_solve(A, F, 1.0, [Z])
        errs.append(rel_l2(system.reconstruction, Z))
    assert errs[0] < 0.15 and errs[1] < errs[0]


def test_galerkin_degenerate_basis(small):
    g, A, F = small
    b = solver.bump_basis(g, SU2, 2)
    with pytest.raises(errors.BasisDegenerate):
        solver.galerkin_solve(A, F, 1.0, [b[0], b[1], b[0] * 2.0])


# asymptotic split and Gauss law

def test_split_with_zero_z0_equals_plain_solve(su2_problem):
    A, F = su2_problem.A, su2_problem.F
    Z, _ = solver.solve_poisson(A, F, TOL)
    Zs, rep = solver.asymptotic_split_solve(A, F, gf.ScalarField.zeros(F.grid, SU2), TOL)
    assert Zs.data.tobytes() == Z.data.tobytes()
    assert rep.diagnostics["reduced_source_condition_norm"] > 0


def test_split_with_exact_z0_gives_zero_correction(su2_problem):
    A, Z0 = su2_problem.A, su2_problem.Z_exact
    F = gf.covariant_laplacian(A, Z0)
    Z, rep = solver.asymptotic_split_solve(A, F, Z0, TOL)
    assert rep.diagnostics["correction_norm"] <= 10 * TOL * np.sqrt(np.sum(Z0.grid.trapezoid_weights * Z0.magnitude() ** 2))


def test_split_constant_z0_is_harmonic():
    g = gf.Grid3(1.0, 9)
    alg = la.u1(2)
    Z0 = gf.ScalarField.constant(g, alg, [2.5, 0.0])
    Z, _ = solver.asymptotic_split_solve(None, gf.ScalarField.zeros(g, alg), Z0, TOL)
    assert Z.data.tobytes() == Z0.data.tobytes()


@pytest.mark.parametrize("alg", [la.u1(), SU2], ids=["u1", "su2"])
def test_gauss_law_divergence_residual(alg):
    g = gf.Grid3(2.0, 13)
    A = gf.GaussianPotential.random(alg, 2.0, 6)(g)
    J0 = gf.sample_bump(g, alg, (0, 0, 0), 0.6, np.ones(alg.dim))
    Phi, E, rep = solver.gauss_law_split(A, J0, TOL)
    assert rep.diagnostics["divergence_residual"] <= 10 * TOL
    np.testing.assert_array_equal(E[0].data, gf.covariant_derivative(A, Phi, 0, boundary="zero").data)


def test_gauss_law_zero_source():
    g = gf.Grid3(2.0, 9)
    Phi, E, _ = solver.gauss_law_split(None, gf.ScalarField.zeros(g, SU2), TOL)
    assert np.all(Phi.data == 0) and np.all(E.data == 0)
