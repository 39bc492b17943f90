"""Discrete covariant Poisson problem: operator, CG solve, Galerkin system.

The unknown lives on interior nodes; boundary values are zero (the decaying
class). With the zero-extension closure of the first derivative, the operator
``-Delta(A) = sum_k nabla_k^* nabla_k`` is symmetric positive definite in the
h-weighted dot product because ``ad A_k`` is h-antisymmetric.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.linalg

from . import lie_algebra as la
from .errors import BasisDegenerate, GridTooSmall, MaxIterationsExceeded
from .grid_fields import (
    Bump,
    GaussianPotential,
    Grid3,
    ScalarField,
    VectorField,
    ad_arrays,
    check_compatible,
    cov_diff_array,
    covariant_laplacian,
    longitudinal_field,
)
from .norms import h1_inner_product, lp_of_magnitude, source_condition_norm, weight_at

_INT = (slice(1, -1),) * 3


class DiscreteOperator:
    """Matrix-free ``-Delta(A)`` on interior nodes with zero Dirichlet data.

    Vectors are arrays of shape ``(n-2, n-2, n-2, d)``.
    """

    symmetric = True

    def __init__(self, A: VectorField | None, grid: Grid3 | None = None, alg: la.AlgebraSpec | None = None):
        if A is not None:
            grid, alg = A.grid, A.alg
        if grid is None or alg is None:
            raise ValueError("need a potential or an explicit grid and algebra")
        if grid.n < 5:
            raise GridTooSmall(f"the solver needs n >= 5, got {grid.n}")
        self.grid = grid
        self.alg = alg
        self._ad = ad_arrays(A)
        self._full = np.zeros(grid.shape + (alg.dim,))

    @property
    def shape(self):
        return (self.grid.n - 2,) * 3 + (self.alg.dim,)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def embed(self, u: np.ndarray) -> np.ndarray:
        full = np.zeros(self.grid.shape + (self.alg.dim,))
        full[_INT] = u
        return full

    def apply(self, u: np.ndarray) -> np.ndarray:
        full = self._full
        full[_INT] = u
        h = self.grid.spacing
        out = np.zeros(self.shape)
        for k in range(3):
            adk = None if self._ad is None else self._ad[k]
            g = cov_diff_array(full, adk, k, h, "zero")
            out -= cov_diff_array(g, adk, k, h, "zero")[_INT]
        return out

    __call__ = apply

    def __matmul__(self, u):
        return self.apply(u)

    def inner(self, u: np.ndarray, v: np.ndarray) -> float:
        """h-weighted dot product in which the operator is symmetric."""
        return float(np.sum(u * (v @ self.alg.h)))

    def jacobi_scale(self) -> np.ndarray:
        """Per-node scalar diagonal estimate ``3/(2 h^2) + tr(-sum_k ad_k^2)/d``."""
        s = np.full(self.shape[:3], 3.0 / (2.0 * self.grid.spacing**2))
        if self._ad is not None:
            for adk in self._ad:
                s -= np.einsum("...ab,...ba->...", adk, adk)[_INT] / self.alg.dim
        return s


def assemble_operator(A: VectorField | None, grid: Grid3 | None = None,
                      alg: la.AlgebraSpec | None = None) -> DiscreteOperator:
    return DiscreteOperator(A, grid, alg)


@dataclass
class SolveReport:
    iterations: int
    final_residual: float
    tolerance: float
    wall_time: float
    boundary_magnitude: float
    converged: bool = True
    diagnostics: dict = field(default_factory=dict)
    history: list = field(default_factory=list, repr=False)

    def to_dict(self, include_time: bool = True) -> dict:
        d = {
            "iterations": int(self.iterations),
            "final_residual": float(self.final_residual),
            "tolerance": float(self.tolerance),
            "boundary_magnitude": float(self.boundary_magnitude),
        }
        if include_time:
            d["wall_time_s"] = float(self.wall_time)
        if self.diagnostics:
            d["diagnostics"] = {k: _plain(v) for k, v in self.diagnostics.items()}
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _plain(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


def conjugate_gradient(op: DiscreteOperator, b: np.ndarray, tol: float, max_iter: int,
                       x0: np.ndarray | None = None, preconditioner: str | None = None):
    """Preconditioned CG in the h-weighted inner product.

    Stops when the true relative residual ``|b - op x|_h / |b|_h <= tol``.
    Returns ``(x, iterations, relative_residual, history)``.
    """
    bnorm = np.sqrt(op.inner(b, b))
    x = np.zeros_like(b) if x0 is None else x0.copy()
    if bnorm == 0.0:
        return x, 0, 0.0, [0.0]
    scale = op.jacobi_scale()[..., None] if preconditioner == "jacobi" else None
    it = 0
    history = []
    while True:
        r = b - op.apply(x)
        rel = np.sqrt(op.inner(r, r)) / bnorm
        history.append(rel)
        if rel <= tol or it >= max_iter:
            return x, it, rel, history
        z = r / scale if scale is not None else r
        p = z.copy()
        rz = op.inner(r, z)
        while it < max_iter:
            q = op.apply(p)
            alpha = rz / op.inner(p, q)
            x += alpha * p
            r -= alpha * q
            it += 1
            rel = np.sqrt(op.inner(r, r)) / bnorm
            history.append(rel)
            if rel <= 0.5 * tol:
                break
            z = r / scale if scale is not None else r
            rz_new = op.inner(r, z)
            p *= rz_new / rz
            p += z
            rz = rz_new


def solve_poisson(A: VectorField | None, F: ScalarField, tol: float = 1e-10, max_iter: int = 20000,
                  preconditioner: str | None = None, sigma: float | None = None,
                  raise_on_failure: bool = True):
    """Solve ``Delta(A) Z = F`` with ``Z = 0`` on the boundary.

    Returns ``(Z, SolveReport)``. The boundary values of ``F`` are not part of
    the system; their largest magnitude is reported as a truncation hint.
    On non-convergence raises :class:`MaxIterationsExceeded` carrying the best
    iterate, unless ``raise_on_failure`` is false.
    """
    if tol <= 0:
        raise ValueError(f"tolerance must be positive, got {tol}")
    if A is not None:
        check_compatible(A[0], F)
    op = DiscreteOperator(A, F.grid, F.alg)
    t0 = time.perf_counter()
    b = -np.ascontiguousarray(F.data[_INT])
    x, iters, rel, history = conjugate_gradient(op, b, tol, max_iter, preconditioner=preconditioner)
    wall = time.perf_counter() - t0
    Z = ScalarField(F.grid, F.alg, op.embed(x))
    diagnostics = {"near_boundary_solution": Z.boundary_magnitude(2)}
    if sigma is not None:
        diagnostics["source_condition_norm"] = source_condition_norm(F, sigma)
    report = SolveReport(iters, rel, tol, wall, F.boundary_magnitude(1), converged=bool(rel <= tol),
                         diagnostics=diagnostics, history=history)
    if not report.converged and raise_on_failure:
        raise MaxIterationsExceeded(
            f"CG reached {iters} iterations with relative residual {rel:.3e} > {tol:.1e}", Z, report)
    return Z, report


def residual(A: VectorField | None, Z: ScalarField, F: ScalarField) -> float:
    """``|Delta(A) Z - F|_h / |F|_h`` over interior nodes, solver closure."""
    op = DiscreteOperator(A, F.grid, F.alg)
    r = -op.apply(Z.data[_INT]) - F.data[_INT]
    fn = op.inner(F.data[_INT], F.data[_INT])
    return float(np.sqrt(op.inner(r, r) / fn)) if fn else float(np.sqrt(op.inner(r, r)))


class ManufacturedProblem(NamedTuple):
    A: VectorField
    Z_exact: ScalarField
    F: ScalarField


def manufactured_problem(grid: Grid3, alg: la.AlgebraSpec, seed: int, variant: str = "discrete",
                         with_potential: bool = True) -> ManufacturedProblem:
    """Potential, exact solution and source with ``Delta(A) Z_exact = F``.

    ``Z_exact`` is a compactly supported bump well inside the box; ``A`` is a
    sum of 1-3 Gaussian bumps in random algebra directions. ``variant``:

    ``"discrete"``
        ``F`` is the discrete operator applied to ``Z_exact``; the linear
        system is exactly consistent.
    ``"analytic"``
        ``F = Delta Z + sum_k ([d_k A_k, Z] + 2 [A_k, d_k Z] + [A_k, [A_k, Z]])``
        from closed forms, for order-of-accuracy studies.
    """
    if variant not in ("discrete", "analytic"):
        raise ValueError(f"variant must be 'discrete' or 'analytic', got {variant!r}")
    rng = np.random.default_rng(seed)
    L = grid.L
    direction = rng.standard_normal(alg.dim)
    direction /= np.linalg.norm(direction)
    bump = Bump(tuple(rng.uniform(-0.1 * L, 0.1 * L, 3)), 0.85 * L, tuple(direction))
    count = int(rng.integers(1, 4))
    pot = GaussianPotential.random(alg, L, int(rng.integers(2**31)), count=count, amplitude=0.5)

    pts = grid.points
    Z = bump.sample(grid, alg)
    A = pot(grid) if with_potential else VectorField.zeros(grid, alg)
    if variant == "discrete":
        F = covariant_laplacian(A, Z, boundary="zero")
        return ManufacturedProblem(A, Z, F)

    v = np.asarray(bump.direction)
    F = bump.laplacian_profile(pts)[..., None] * v
    if with_potential and not alg.is_abelian:
        grad = bump.gradient_profile(pts)
        Zd = Z.data
        Avals = pot.values(pts)
        divs = pot.divergence_terms(pts)
        for k in range(3):
            F = F + la.bracket(alg, divs[k], Zd)
            F = F + 2.0 * la.bracket(alg, Avals[k], grad[..., k, None] * v)
            F = F + la.bracket(alg, Avals[k], la.bracket(alg, Avals[k], Zd))
    return ManufacturedProblem(A, Z, ScalarField(grid, alg, F))


@dataclass
class GalerkinSystem:
    matrix: np.ndarray
    rhs: np.ndarray
    sigma: float
    basis: list
    pivots: np.ndarray
    reconstruction: ScalarField | None = None

    @property
    def conditioning(self) -> dict:
        """Smallest relative Gram-Schmidt pivot and the condition of ``matrix``."""
        return {"min_relative_pivot": float(self.pivots.min()) if self.pivots.size else 1.0,
                "matrix_condition": float(np.linalg.cond(self.matrix)) if self.matrix.size else 1.0}


def orthonormalize(A, basis, sigma, pivot_tol: float = 1e-12):
    """Modified Gram-Schmidt in ``<.,.>_1``; returns ``(orthonormal list, relative pivots)``."""
    out, pivots = [], []
    for v in basis:
        n0 = np.sqrt(max(h1_inner_product(A, v, v, sigma), 0.0))
        if n0 == 0.0:
            raise BasisDegenerate("basis contains a field with zero H1 norm")
        for q in out:
            v = v - q * h1_inner_product(A, v, q, sigma)
        nv = np.sqrt(max(h1_inner_product(A, v, v, sigma), 0.0))
        if nv < pivot_tol * n0:
            raise BasisDegenerate(f"Gram-Schmidt pivot {nv / n0:.3e} below {pivot_tol:.0e} at basis index {len(out)}")
        out.append(v * (1.0 / nv))
        pivots.append(nv / n0)
    return out, np.asarray(pivots)


def drift_integral(A, Psi: ScalarField, Phi: ScalarField, sigma: float) -> float:
    """``int sum_k x_k / w^{3-sigma} (Psi, nabla_k Phi)``."""
    grid = Psi.grid
    ad = ad_arrays(A)
    kern = weight_at(grid.points, -(3.0 - sigma))
    integrand = np.zeros(grid.shape)
    for k in range(3):
        d = cov_diff_array(Phi.data, None if ad is None else ad[k], k, grid.spacing)
        integrand += grid.points[..., k] * np.einsum("...a,ab,...b->...", Psi.data, Psi.alg.h, d)
    return float(np.sum(grid.trapezoid_weights * kern * integrand))


def source_functional(F: ScalarField, Psi: ScalarField, sigma: float) -> float:
    """``int w^{-(1-sigma)} (F, Psi)``."""
    grid = F.grid
    wgt = weight_at(grid.points, -(1.0 - sigma)) if sigma != 1.0 else 1.0
    return float(np.sum(grid.trapezoid_weights * wgt * np.einsum("...a,ab,...b->...", F.data, F.alg.h, Psi.data)))


def galerkin_solve(A: VectorField | None, F: ScalarField, sigma: float, basis):
    """Finite section of the weighted weak problem in an ``H_1``-orthonormal basis.

    Solves ``a_n - (1-sigma) sum_m a_m D_nm = -int w^{-(1-sigma)} (F, Psi_n)``
    with ``D_nm = int sum_k x_k w^{-(3-sigma)} (Psi_n, nabla_k Psi_m)`` by dense
    LU. Returns ``(coefficients, GalerkinSystem)``; the system carries the
    reconstruction ``sum_n a_n Psi_n``.
    """
    basis = list(basis)
    if not basis:
        raise BasisDegenerate("empty basis")
    Q, pivots = orthonormalize(A, basis, sigma)
    m = len(Q)
    M = np.eye(m)
    if sigma != 1.0:
        for i in range(m):
            for j in range(m):
                M[i, j] -= (1.0 - sigma) * drift_integral(A, Q[i], Q[j], sigma)
    b = np.array([-source_functional(F, q, sigma) for q in Q])
    if not np.any(b):
        a = np.zeros(m)
    else:
        a = scipy.linalg.lu_solve(scipy.linalg.lu_factor(M), b)
    Z = ScalarField.zeros(F.grid, F.alg)
    for ai, q in zip(a, Q):
        Z = Z + q * ai
    return a, GalerkinSystem(M, b, sigma, Q, pivots, Z)


def bump_basis(grid: Grid3, alg: la.AlgebraSpec, count: int, seed: int = 0, radius: float | None = None):
    """Auto-generated Galerkin basis of bumps at seeded positions and directions."""
    rng = np.random.default_rng(seed)
    radius = 0.4 * grid.L if radius is None else radius
    out = []
    for _ in range(count):
        c = rng.uniform(-(grid.L - radius) * 0.8, (grid.L - radius) * 0.8, 3)
        u = rng.standard_normal(alg.dim)
        out.append(Bump(tuple(c), radius, tuple(u / np.linalg.norm(u))).sample(grid, alg))
    return out


def asymptotic_split_solve(A: VectorField | None, F: ScalarField, Z0: ScalarField, tol: float = 1e-10,
                           max_iter: int = 20000, sigma: float = 1.0, **kwargs):
    """``Z = Y + Z0`` with ``Delta(A) Y = F - Delta(A) Z0`` and ``Y = 0`` on the boundary.

    ``Z0`` carries any nontrivial boundary behaviour. The report adds
    ``|| w^{(1+sigma)/2} (F - Delta(A) Z0) ||_2`` over interior nodes.
    """
    check_compatible(F, Z0)
    Fp = F - covariant_laplacian(A, Z0)
    Y, report = solve_poisson(A, Fp, tol, max_iter, **kwargs)
    mag = Fp.magnitude()
    report.diagnostics["reduced_source_condition_norm"] = lp_of_magnitude(
        mag, F.grid, 2, weight_at(F.grid.points, 0.5 * (1.0 + sigma)), margin=1)
    report.diagnostics["correction_norm"] = lp_of_magnitude(Y.magnitude(), F.grid, 2)
    return Y + Z0, report


def gauss_law_split(A: VectorField | None, J0: ScalarField, tol: float = 1e-10, max_iter: int = 20000, **kwargs):
    """Longitudinal electric field: ``Delta(A) Phi = J0``, ``E^L_k = nabla_k Phi``.

    ``E^L`` uses the solver's zero-extension closure, so the divergence
    residual ``sum_k nabla_k E^L_k - J0`` on interior nodes equals the solve
    residual.
    """
    Phi, report = solve_poisson(A, J0, tol, max_iter, **kwargs)
    E = longitudinal_field(A, Phi, boundary="zero")
    ad = ad_arrays(A)
    div = np.zeros_like(J0.data)
    for k in range(3):
        div += cov_diff_array(E[k].data, None if ad is None else ad[k], k, J0.grid.spacing, "zero")
    r = (div - J0.data)[_INT]
    h = J0.alg.h
    jn = np.sum(J0.data[_INT] * (J0.data[_INT] @ h))
    rn = np.sum(r * (r @ h))
    report.diagnostics["divergence_residual"] = float(np.sqrt(rn / jn)) if jn else float(np.sqrt(rn))
    return Phi, E, report
