"""Weights, weighted L^p quadrature and covariant Sobolev-type norms.

The weight is ``w(x) = (1 + |x|^2)^(1/2)``. All integrals use the trapezoid
rule on the grid. Derivative tensors of order ``p`` are built from ``p``
nested first-order covariant derivatives over every ordered index tuple
``(k_1, ..., k_p)``, because covariant derivatives do not commute.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import OrderTooLargeForGrid, POutOfRange
from .grid_fields import Grid3, ScalarField, VectorField, ad_arrays, check_compatible, cov_diff_array


def weight_at(x, exponent: float):
    """``w(x)**exponent`` for points of shape ``(..., 3)``."""
    x = np.asarray(x, dtype=float)
    return (1.0 + np.sum(x**2, axis=-1)) ** (0.5 * exponent)


@dataclass(frozen=True)
class WeightSpec:
    sigma: float
    exponent: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.sigma <= 1.0:
            raise ValueError(f"sigma must lie in (0, 1], got {self.sigma}")

    def __call__(self, x):
        return weight_at(x, self.exponent)


def check_sigma(sigma: float) -> float:
    return WeightSpec(sigma).sigma


@dataclass
class NormReport:
    value: float
    quadrature: str
    grid: Grid3
    p: float = 2.0
    sigma: float | None = None
    w_exp: float | None = None
    extras: dict = field(default_factory=dict)

    def __float__(self):
        return float(self.value)

    def to_dict(self) -> dict:
        return {"value": float(self.value), "p": _json_p(self.p), "sigma": self.sigma,
                "w_exp": self.w_exp, "grid": self.grid.summary()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _json_p(p):
    return "inf" if p == np.inf else float(p)


def lp_of_magnitude(mag: np.ndarray, grid: Grid3, p: float, weight: np.ndarray | float = 1.0,
                    margin: int = 0) -> float:
    """``|| weight * mag ||_p`` by trapezoid quadrature (max for ``p = inf``).

    ``margin > 0`` restricts to nodes that many steps inside the box.
    """
    if not (p == np.inf or p >= 1):
        raise POutOfRange(f"p must lie in [1, inf], got {p}")
    g = np.abs(weight * mag)
    if margin:
        mask = grid.interior_mask(margin)
        g = g[mask]
        q = grid.trapezoid_weights[mask]
    else:
        q = grid.trapezoid_weights
    if p == np.inf:
        return float(g.max()) if g.size else 0.0
    if p == 2:
        return float(np.sqrt(np.sum(q * g * g)))
    return float(np.sum(q * g**p) ** (1.0 / p))


def weighted_lp_norm(F: ScalarField, p: float = 2.0, w_exp: float = 0.0, margin: int = 0) -> NormReport:
    """``|| w^w_exp |F| ||_p`` over the box."""
    wgt = weight_at(F.grid.points, w_exp) if w_exp else 1.0
    value = lp_of_magnitude(F.magnitude(), F.grid, p, wgt, margin)
    return NormReport(value, "trapezoid" if p != np.inf else "nodal max", F.grid, p=p, w_exp=w_exp)


def _sq_mag(u, h):
    return np.einsum("...a,ab,...b->...", u, h, u)


def derivative_magnitudes(A: VectorField | None, fields, max_order: int,
                          boundary: str = "onesided") -> list[np.ndarray]:
    """Node-wise ``|nabla^p F|`` for ``p = 0..max_order``.

    ``fields`` is a ScalarField or a list of them (the components of a
    tensor; their squared norms add). The tensor of order ``p`` is walked
    depth-first so only ``max_order`` intermediate arrays are alive.
    """
    comps = [fields] if isinstance(fields, ScalarField) else list(fields)
    grid, alg = comps[0].grid, comps[0].alg
    if A is not None:
        check_compatible(A[0], comps[0])
    ad = ad_arrays(A)
    h = grid.spacing
    acc = [np.zeros(grid.shape) for _ in range(max_order + 1)]

    def walk(u, depth):
        acc[depth] += _sq_mag(u, alg.h)
        if depth == max_order:
            return
        for k in range(3):
            walk(cov_diff_array(u, None if ad is None else ad[k], k, h, boundary), depth + 1)

    for c in comps:
        walk(c.data, 0)
    return [np.sqrt(np.maximum(a, 0.0)) for a in acc]


def _check_order(grid: Grid3, order: int, margin: int = 0):
    if order < 0 or 2 * order + 2 * margin >= grid.n:
        raise OrderTooLargeForGrid(f"order {order} with interior margin {margin} does not fit n={grid.n}")


def h1_inner_product(A: VectorField | None, Phi: ScalarField, Psi: ScalarField, sigma: float,
                     margin: int = 0, boundary: str = "onesided") -> float:
    """``<Phi, Psi>_1 = int w^{-(1-sigma)} sum_k (nabla_k Phi, nabla_k Psi)``."""
    check_compatible(Phi, Psi)
    if A is not None:
        check_compatible(A[0], Phi)
    grid = Phi.grid
    ad = ad_arrays(A)
    integrand = np.zeros(grid.shape)
    for k in range(3):
        adk = None if ad is None else ad[k]
        dphi = cov_diff_array(Phi.data, adk, k, grid.spacing, boundary)
        dpsi = dphi if Psi is Phi else cov_diff_array(Psi.data, adk, k, grid.spacing, boundary)
        integrand += np.einsum("...a,ab,...b->...", dphi, Phi.alg.h, dpsi)
    if sigma != 1.0:
        integrand *= weight_at(grid.points, -(1.0 - sigma))
    q = grid.trapezoid_weights
    if margin:
        mask = grid.interior_mask(margin)
        return float(np.sum((q * integrand)[mask]))
    return float(np.sum(q * integrand))


def sobolev_norm_from_magnitudes(mags, grid: Grid3, n: int, sigma: float, margin: int = 0) -> float:
    total = 0.0
    for p in range(1, n + 1):
        wgt = weight_at(grid.points, (p - 1.5) * (1.0 - sigma)) if sigma != 1.0 else 1.0
        total += lp_of_magnitude(mags[p], grid, 2, wgt, margin) ** 2
    return float(np.sqrt(total))


def sobolev_norm(A: VectorField | None, F: ScalarField, n: int, sigma: float,
                 margin: int = 0) -> NormReport:
    """``||F||_{n,2}^2 = sum_{p=1..n} || w^{(p-3/2)(1-sigma)} |nabla^p F| ||_2^2``.

    There is no zeroth-order term. ``margin`` selects the interior-only
    variant used in convergence studies.
    """
    if n < 1:
        raise OrderTooLargeForGrid(f"Sobolev order must be at least 1, got {n}")
    _check_order(F.grid, n, margin)
    mags = derivative_magnitudes(A, F, n)
    value = sobolev_norm_from_magnitudes(mags, F.grid, n, sigma, margin)
    label = "trapezoid" if not margin else f"trapezoid, interior margin {margin}"
    return NormReport(value, label, F.grid, p=2, sigma=sigma)


def sup_norm_from_magnitudes(mags, grid: Grid3, n: int, sigma: float, margin: int = 0) -> float:
    best = 0.0
    for p in range(0, n - 1):
        wgt = weight_at(grid.points, p * (1.0 - sigma)) if p and sigma != 1.0 else 1.0
        best = max(best, lp_of_magnitude(mags[p], grid, np.inf, wgt, margin))
    return best


def weighted_sup_norm(A: VectorField | None, F: ScalarField, n: int, sigma: float,
                      margin: int = 0) -> NormReport:
    """``||F||_{n-2,inf} = max_{p<=n-2} sup w^{p(1-sigma)} |nabla^p F|``."""
    if n < 2:
        raise OrderTooLargeForGrid(f"sup-norm index n must be at least 2, got {n}")
    _check_order(F.grid, n - 2, margin)
    mags = derivative_magnitudes(A, F, n - 2)
    value = sup_norm_from_magnitudes(mags, F.grid, n, sigma, margin)
    return NormReport(value, "nodal max", F.grid, p=np.inf, sigma=sigma)


def source_condition_norm(F: ScalarField, sigma: float) -> float:
    """``|| w^{(1+sigma)/2} F ||_2``, finite for admissible sources."""
    return weighted_lp_norm(F, 2, 0.5 * (1.0 + sigma)).value
