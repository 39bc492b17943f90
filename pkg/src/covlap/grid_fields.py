"""Algebra-valued fields on a uniform box grid and their covariant calculus.

The box ``[-L, L]^3`` carries ``n`` nodes per axis. A scalar field stores an
``(n, n, n, d)`` coefficient array, i.e. node-major with the ``d`` algebra
coefficients contiguous (flat index ``((i*n + j)*n + k)*d + a``).

First derivatives use second-order central differences. At the two boundary
faces of each axis there are two closures:

``"onesided"`` (default)
    second-order one-sided stencils; exact on quadratics.
``"zero"``
    the field is extended by zero outside the box, so the boundary row is a
    central difference against a zero ghost node. This closure makes the
    composed operator ``-sum_k nabla_k nabla_k`` symmetric and is the one the
    Dirichlet solver uses.

Axes are numbered 0, 1, 2 for ``x1, x2, x3``.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import lie_algebra as la
from .errors import (
    AlgebraMismatch,
    AxisOutOfRange,
    BallOutsideBox,
    DeltaNonpositive,
    FieldFormatError,
    GridMismatch,
    MNonpositive,
)

BOUNDARY_MODES = ("onesided", "zero")


@dataclass(frozen=True)
class Grid3:
    """Uniform grid on ``[-L, L]^3`` with ``n`` nodes per axis."""

    L: float
    n: int

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError(f"half width must be positive, got {self.L}")
        if int(self.n) != self.n or self.n < 3:
            raise ValueError(f"need at least 3 nodes per axis, got {self.n}")
        object.__setattr__(self, "L", float(self.L))
        object.__setattr__(self, "n", int(self.n))

    @property
    def spacing(self) -> float:
        return 2.0 * self.L / (self.n - 1)

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n)

    @cached_property
    def axis(self) -> np.ndarray:
        return -self.L + self.spacing * np.arange(self.n)

    @cached_property
    def points(self) -> np.ndarray:
        """Node coordinates, shape ``(n, n, n, 3)``."""
        return np.stack(np.meshgrid(self.axis, self.axis, self.axis, indexing="ij"), axis=-1)

    @cached_property
    def radius(self) -> np.ndarray:
        return np.sqrt(np.sum(self.points**2, axis=-1))

    @cached_property
    def trapezoid_weights(self) -> np.ndarray:
        """Quadrature weights including ``spacing^3`` (1/2 faces, 1/4 edges, 1/8 corners)."""
        w = np.ones(self.n)
        w[0] = w[-1] = 0.5
        return np.einsum("i,j,k->ijk", w, w, w) * self.spacing**3

    def interior_mask(self, margin: int) -> np.ndarray:
        """Nodes at least ``margin`` index steps away from every face."""
        m = np.zeros(self.shape, dtype=bool)
        if 2 * margin < self.n:
            s = slice(margin, self.n - margin)
            m[s, s, s] = True
        return m

    def boundary_mask(self, width: int = 1) -> np.ndarray:
        return ~self.interior_mask(width)

    def refine(self) -> "Grid3":
        """Same box, spacing halved."""
        return Grid3(self.L, 2 * self.n - 1)

    def summary(self) -> dict:
        return {"L": self.L, "n": self.n}


def _frozen(a):
    a = np.asarray(a, dtype=float)
    v = a.view()
    v.flags.writeable = False
    return v


class ScalarField:
    """Algebra-valued mapping sampled on grid nodes; data shape ``(n, n, n, d)``."""

    __slots__ = ("grid", "alg", "data")

    def __init__(self, grid: Grid3, alg: la.AlgebraSpec, data):
        data = np.asarray(data, dtype=float)
        expected = grid.shape + (alg.dim,)
        if data.shape != expected:
            if data.size == np.prod(expected):
                data = data.reshape(expected)
            else:
                raise ValueError(f"field data must have {np.prod(expected)} entries "
                                 f"(shape {expected}), got shape {data.shape}")
        self.grid = grid
        self.alg = alg
        self.data = _frozen(data)

    @classmethod
    def zeros(cls, grid, alg):
        return cls(grid, alg, np.zeros(grid.shape + (alg.dim,)))

    @classmethod
    def constant(cls, grid, alg, value):
        v = np.asarray(value, dtype=float)
        return cls(grid, alg, np.broadcast_to(v, grid.shape + (alg.dim,)).copy())

    @classmethod
    def from_function(cls, grid, alg, fn):
        """``fn(points)`` maps an ``(..., 3)`` coordinate array to ``(..., d)``."""
        return cls(grid, alg, fn(grid.points))

    def _like(self, data):
        return ScalarField(self.grid, self.alg, data)

    def _check(self, other):
        check_compatible(self, other)
        return other.data

    def __add__(self, other):
        return self._like(self.data + self._check(other))

    def __sub__(self, other):
        return self._like(self.data - self._check(other))

    def __mul__(self, c):
        return self._like(self.data * c)

    __rmul__ = __mul__

    def __neg__(self):
        return self._like(-self.data)

    def magnitude(self) -> np.ndarray:
        """Node-wise algebra norm ``|F(x)|``."""
        return np.sqrt(np.maximum(np.einsum("...a,ab,...b->...", self.data, self.alg.h, self.data), 0.0))

    def flat(self) -> np.ndarray:
        return self.data.reshape(-1)

    def boundary_magnitude(self, width: int = 1) -> float:
        mag = self.magnitude()
        return float(mag[self.grid.boundary_mask(width)].max())

    def rotated(self, R) -> "ScalarField":
        """Apply a constant linear map to every node's coefficients."""
        return self._like(self.data @ np.asarray(R).T)

    def __repr__(self):
        return f"ScalarField(n={self.grid.n}, L={self.grid.L}, alg={self.alg.name})"


class VectorField:
    """Three scalar components ``(F_1, F_2, F_3)`` on a shared grid and algebra."""

    __slots__ = ("components",)

    def __init__(self, components):
        comps = tuple(components)
        if len(comps) != 3:
            raise ValueError("a vector field has exactly three components")
        for c in comps[1:]:
            check_compatible(comps[0], c)
        self.components = comps

    @classmethod
    def from_array(cls, grid, alg, data):
        data = np.asarray(data, dtype=float)
        return cls(ScalarField(grid, alg, data[k]) for k in range(3))

    @classmethod
    def zeros(cls, grid, alg):
        return cls(ScalarField.zeros(grid, alg) for _ in range(3))

    @classmethod
    def constant(cls, grid, alg, values):
        return cls(ScalarField.constant(grid, alg, v) for v in values)

    @property
    def grid(self):
        return self.components[0].grid

    @property
    def alg(self):
        return self.components[0].alg

    @property
    def data(self) -> np.ndarray:
        return np.stack([c.data for c in self.components])

    def __getitem__(self, k) -> ScalarField:
        return self.components[k]

    def __iter__(self):
        return iter(self.components)

    def __add__(self, other):
        return VectorField(a + b for a, b in zip(self, other))

    def __sub__(self, other):
        return VectorField(a - b for a, b in zip(self, other))

    def __mul__(self, c):
        return VectorField(a * c for a in self)

    __rmul__ = __mul__

    def magnitude(self) -> np.ndarray:
        return np.sqrt(sum(c.magnitude() ** 2 for c in self))

    def rotated(self, R) -> "VectorField":
        return VectorField(c.rotated(R) for c in self)


class TensorField2:
    """3x3 array of scalar components ``G[k][l]``."""

    __slots__ = ("components",)

    def __init__(self, components):
        rows = tuple(tuple(r) for r in components)
        if len(rows) != 3 or any(len(r) != 3 for r in rows):
            raise ValueError("a rank-2 tensor field has 3x3 components")
        first = rows[0][0]
        for r in rows:
            for c in r:
                check_compatible(first, c)
        self.components = rows

    @property
    def grid(self):
        return self.components[0][0].grid

    @property
    def alg(self):
        return self.components[0][0].alg

    def __getitem__(self, kl) -> ScalarField:
        k, l = kl
        return self.components[k][l]

    def flat_components(self):
        return [c for row in self.components for c in row]

    def magnitude(self) -> np.ndarray:
        return np.sqrt(sum(c.magnitude() ** 2 for c in self.flat_components()))


def check_compatible(a, b):
    if a.grid != b.grid:
        raise GridMismatch(f"grids differ: {a.grid} vs {b.grid}")
    if a.alg is not b.alg and not (
            a.alg.dim == b.alg.dim and np.array_equal(a.alg.f, b.alg.f) and np.array_equal(a.alg.h, b.alg.h)):
        raise AlgebraMismatch(f"algebras differ: {a.alg.name} vs {b.alg.name}")


# array-level stencils

def _axis_slice(axis, sl):
    idx = [slice(None)] * 3
    idx[axis] = sl
    return tuple(idx)


def diff_array(u: np.ndarray, axis: int, spacing: float, boundary: str = "onesided") -> np.ndarray:
    """Second-order first derivative of ``u`` (shape ``(n, n, n, ...)``) along ``axis``."""
    if axis not in (0, 1, 2):
        raise AxisOutOfRange(f"axis must be 0, 1 or 2, got {axis}")
    if boundary not in BOUNDARY_MODES:
        raise ValueError(f"boundary must be one of {BOUNDARY_MODES}, got {boundary!r}")
    s = lambda sl: _axis_slice(axis, sl)  # noqa: E731
    out = np.empty_like(u)
    out[s(slice(1, -1))] = u[s(slice(2, None))] - u[s(slice(None, -2))]
    if boundary == "onesided":
        u0, u1, u2 = u[s(0)], u[s(1)], u[s(2)]
        out[s(0)] = 4.0 * (u1 - u0) - (u2 - u0)
        v0, v1, v2 = u[s(-1)], u[s(-2)], u[s(-3)]
        out[s(-1)] = (v2 - v0) - 4.0 * (v1 - v0)
    else:
        out[s(0)] = u[s(1)]
        out[s(-1)] = -u[s(-2)]
    out *= 1.0 / (2.0 * spacing)
    return out


def ad_arrays(A: "VectorField | None"):
    """Node-wise ``ad A_k`` matrices, or ``None`` when they vanish identically."""
    if A is None or A.alg.is_abelian:
        return None
    return [la.ad_matrix(A.alg, c.data) for c in A]


def _matvec(m, u):
    # einsum beats batched matmul for tiny per-node matrices
    return np.einsum("...cb,...b->...c", m, u)


def cov_diff_array(u, ad_k, axis, spacing, boundary="onesided"):
    """``d_k u + [A_k, u]`` on raw arrays; ``ad_k`` may be ``None``."""
    out = diff_array(u, axis, spacing, boundary)
    if ad_k is not None:
        out += _matvec(ad_k, u)
    return out


# field-level operations

def partial_derivative(F: ScalarField, k: int, boundary: str = "onesided") -> ScalarField:
    return ScalarField(F.grid, F.alg, diff_array(F.data, k, F.grid.spacing, boundary))


def covariant_derivative(A: VectorField | None, F: ScalarField, k: int,
                         boundary: str = "onesided") -> ScalarField:
    """``nabla_k F = d_k F + [A_k, F]``; ``A=None`` means the zero potential."""
    if A is None or A.alg.is_abelian:
        if A is not None:
            check_compatible(A[0], F)
        return partial_derivative(F, k, boundary)
    check_compatible(A[0], F)
    out = diff_array(F.data, k, F.grid.spacing, boundary)
    out += la.bracket(F.alg, A[k].data, F.data)
    return ScalarField(F.grid, F.alg, out)


def curvature(A: VectorField, boundary: str = "onesided") -> TensorField2:
    """``G_kl = d_l A_k - d_k A_l - [A_k, A_l]``; exactly antisymmetric."""
    grid, alg = A.grid, A.alg
    zero = ScalarField.zeros(grid, alg)
    G = [[zero] * 3 for _ in range(3)]
    for k in range(3):
        for l in range(k + 1, 3):
            g = (diff_array(A[k].data, l, grid.spacing, boundary)
                 - diff_array(A[l].data, k, grid.spacing, boundary))
            if not alg.is_abelian:
                g -= la.bracket(alg, A[k].data, A[l].data)
            G[k][l] = ScalarField(grid, alg, g)
            G[l][k] = ScalarField(grid, alg, -g)
    return TensorField2(G)


def covariant_divergence(A: VectorField | None, G: TensorField2,
                         boundary: str = "onesided") -> VectorField:
    """``(nabla . G)_k = sum_j nabla_j G_jk``."""
    if A is not None:
        check_compatible(A[0], G[0, 0])
    return VectorField(
        ScalarField(G.grid, G.alg, sum(covariant_derivative(A, G[j, k], j, boundary).data for j in range(3)))
        for k in range(3))


def covariant_laplacian(A: VectorField | None, Z: ScalarField,
                        boundary: str = "onesided") -> ScalarField:
    """``Delta(A) Z = sum_k nabla_k (nabla_k Z)`` by nested first derivatives."""
    if A is not None:
        check_compatible(A[0], Z)
    ad = ad_arrays(A)
    h = Z.grid.spacing
    out = np.zeros_like(Z.data)
    for k in range(3):
        adk = None if ad is None else ad[k]
        out += cov_diff_array(cov_diff_array(Z.data, adk, k, h, boundary), adk, k, h, boundary)
    return ScalarField(Z.grid, Z.alg, out)


def longitudinal_field(A: VectorField | None, Phi: ScalarField, boundary: str = "onesided") -> VectorField:
    """``E^L_k = nabla_k Phi``."""
    return VectorField(covariant_derivative(A, Phi, k, boundary) for k in range(3))


def commutator_residual(A: VectorField, Psi: ScalarField, k: int, l: int,
                        G: TensorField2 | None = None) -> ScalarField:
    """``[nabla_k, nabla_l] Psi + [G_kl, Psi]``; vanishes in the continuum."""
    G = curvature(A) if G is None else G
    kl = covariant_derivative(A, covariant_derivative(A, Psi, l), k)
    lk = covariant_derivative(A, covariant_derivative(A, Psi, k), l)
    return ScalarField(Psi.grid, Psi.alg, kl.data - lk.data + la.bracket(Psi.alg, G[k, l].data, Psi.data))


# mollification and truncation

def bump_profile(r):
    """``exp(-1/(1 - r^2))`` for ``r < 1`` and 0 otherwise."""
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    inside = r < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - r[inside] ** 2))
    return out


def mollifier_kernel(grid: Grid3, delta: float) -> np.ndarray:
    """Sampled ``eta_delta`` normalized so that ``sum(kernel) * spacing^3 == 1``."""
    if not delta > 0:
        raise DeltaNonpositive(f"mollification radius must be positive, got {delta}")
    h = grid.spacing
    m = int(np.ceil(delta / h))
    off = h * np.arange(-m, m + 1)
    r = np.sqrt(off[:, None, None] ** 2 + off[None, :, None] ** 2 + off[None, None, :] ** 2) / delta
    eta = bump_profile(r)
    if eta.sum() == 0.0:
        eta[m, m, m] = 1.0
    return eta / (eta.sum() * h**3)


def mollify(F: ScalarField, delta: float) -> ScalarField:
    """Convolve with the unit-mass mollifier of radius ``delta``.

    Near the faces the kernel is clipped to the box and renormalized, so
    constants are reproduced everywhere.
    """
    kernel = mollifier_kernel(F.grid, delta)
    if kernel.shape == (1, 1, 1):
        return F
    ones = ndimage.correlate(np.ones(F.grid.shape), kernel, mode="constant", cval=0.0)
    out = np.empty_like(F.data)
    for a in range(F.alg.dim):
        out[..., a] = ndimage.correlate(F.data[..., a], kernel, mode="constant", cval=0.0) / ones
    return ScalarField(F.grid, F.alg, out)


def mollify_vector(A: VectorField, delta: float) -> VectorField:
    return VectorField(mollify(c, delta) for c in A)


_CUTOFF_RADIUS = 1.5
_CUTOFF_SCALE = 0.25
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(96)


def cutoff_profile(r):
    """Radial smooth cutoff ``tau``: 1 for ``r <= 5/4``, 0 for ``r >= 7/4``.

    It is the indicator of the ball of radius 3/2 mollified at scale 1/4,
    evaluated by shell integration: a sphere of radius ``s`` around a point
    at distance ``r`` has the fraction ``(1 + clip(c, -1, 1)) / 2`` of its
    area inside the ball, ``c = (R^2 - r^2 - s^2) / (2 r s)``.
    """
    r = np.asarray(r, dtype=float)
    R, delta = _CUTOFF_RADIUS, _CUTOFF_SCALE
    s = 0.5 * delta * (_GL_NODES + 1.0)
    wts = _GL_WEIGHTS * s**2 * bump_profile(s / delta)
    wts = wts / wts.sum()
    out = np.zeros_like(r)
    flat_r = r.reshape(-1)
    flat = out.reshape(-1)
    inner = flat_r <= R - delta
    flat[inner] = 1.0
    band = ~inner & (flat_r < R + delta)
    rb = flat_r[band][:, None]
    c = (R**2 - rb**2 - s[None, :] ** 2) / (2.0 * rb * s[None, :])
    frac = 0.5 * (1.0 + np.clip(c, -1.0, 1.0))
    flat[band] = frac @ wts
    return out


def truncate(F: ScalarField, m: float) -> ScalarField:
    """Multiply by ``tau(x / m)``: identity for ``|x| <= m``, zero for ``|x| >= 2m``."""
    if not m > 0:
        raise MNonpositive(f"truncation radius must be positive, got {m}")
    tau = cutoff_profile(F.grid.radius / m)
    return ScalarField(F.grid, F.alg, F.data * tau[..., None])


# test-field generators

@dataclass(frozen=True)
class Bump:
    """Compactly supported smooth bump ``exp(-1/(1-rho^2)) * direction``.

    ``rho = |x - center| / radius``. Carries analytic gradient and Laplacian
    for manufactured-solution sources.
    """

    center: tuple
    radius: float
    direction: tuple

    def _rho2(self, pts):
        d = pts - np.asarray(self.center)
        return d, np.sum(d**2, axis=-1) / self.radius**2

    def _g(self, s):
        g = np.zeros_like(s)
        inside = s < 1.0
        g[inside] = np.exp(-1.0 / (1.0 - s[inside]))
        return g, inside

    def profile(self, pts):
        _, s = self._rho2(pts)
        return self._g(s)[0]

    def values(self, pts):
        return self.profile(pts)[..., None] * np.asarray(self.direction)

    def gradient_profile(self, pts):
        """``d_k`` of the scalar profile, shape ``(..., 3)``."""
        d, s = self._rho2(pts)
        g, inside = self._g(s)
        gp = np.zeros_like(s)
        gp[inside] = -g[inside] / (1.0 - s[inside]) ** 2
        return gp[..., None] * 2.0 * d / self.radius**2

    def laplacian_profile(self, pts):
        _, s = self._rho2(pts)
        g, inside = self._g(s)
        gp = np.zeros_like(s)
        gpp = np.zeros_like(s)
        si = s[inside]
        gp[inside] = -g[inside] / (1.0 - si) ** 2
        gpp[inside] = g[inside] * (2.0 * si - 1.0) / (1.0 - si) ** 4
        R2 = self.radius**2
        return gpp * 4.0 * s / R2 + 6.0 * gp / R2

    def sample(self, grid: Grid3, alg: la.AlgebraSpec) -> ScalarField:
        return ScalarField(grid, alg, self.values(grid.points))


def sample_bump(grid: Grid3, alg: la.AlgebraSpec, center, radius: float, direction) -> ScalarField:
    """Smooth compactly supported test mapping; the ball must lie in the box."""
    center = np.asarray(center, dtype=float)
    if not radius > 0:
        raise BallOutsideBox(f"bump radius must be positive, got {radius}")
    if np.any(np.abs(center) + radius > grid.L):
        raise BallOutsideBox(f"ball(center={center.tolist()}, radius={radius}) leaves the box [-{grid.L}, {grid.L}]^3")
    direction = np.asarray(direction, dtype=float)
    if direction.shape != (alg.dim,):
        raise la.DimensionMismatch(f"direction must have {alg.dim} coefficients")
    return Bump(tuple(center), float(radius), tuple(direction)).sample(grid, alg)


@dataclass(frozen=True)
class GaussianPotential:
    """Smooth bounded potential ``A_k = sum_j a_j exp(-|x-c_j|^2/s_j^2) u_jk``.

    Callable on any grid, so checks can re-sample it after refinement.
    """

    alg: la.AlgebraSpec
    centers: tuple
    widths: tuple
    amplitudes: tuple
    directions: tuple  # per bump, per axis k: coefficient tuple

    @classmethod
    def random(cls, alg, L, seed, count=2, amplitude=0.5, width=None):
        rng = np.random.default_rng(seed)
        width = 0.4 * L if width is None else width
        centers, widths, amps, dirs = [], [], [], []
        for _ in range(count):
            centers.append(tuple(rng.uniform(-0.3 * L, 0.3 * L, 3)))
            widths.append(float(width * rng.uniform(0.8, 1.2)))
            amps.append(float(amplitude))
            u = rng.standard_normal((3, alg.dim))
            u /= np.linalg.norm(u, axis=1, keepdims=True)
            dirs.append(tuple(tuple(row) for row in u))
        return cls(alg, tuple(centers), tuple(widths), tuple(amps), tuple(dirs))

    def _terms(self, pts):
        for c, s, a, u in zip(self.centers, self.widths, self.amplitudes, self.directions):
            d = pts - np.asarray(c)
            e = a * np.exp(-np.sum(d**2, axis=-1) / s**2)
            yield d, s, e, np.asarray(u)

    def values(self, pts):
        """``A_k(x)``, shape ``(3, ..., d)``."""
        out = np.zeros((3,) + pts.shape[:-1] + (self.alg.dim,))
        for _, _, e, u in self._terms(pts):
            for k in range(3):
                out[k] += e[..., None] * u[k]
        return out

    def divergence_terms(self, pts):
        """``d_k A_k(x)`` for each ``k``, shape ``(3, ..., d)`` (no sum over k)."""
        out = np.zeros((3,) + pts.shape[:-1] + (self.alg.dim,))
        for d, s, e, u in self._terms(pts):
            for k in range(3):
                out[k] += (-2.0 * d[..., k] / s**2 * e)[..., None] * u[k]
        return out

    def __call__(self, grid: Grid3) -> VectorField:
        return VectorField.from_array(grid, self.alg, self.values(grid.points))


@dataclass(frozen=True)
class ConstantPotential:
    alg: la.AlgebraSpec
    values: tuple  # three coefficient tuples

    def __call__(self, grid: Grid3) -> VectorField:
        return VectorField.constant(grid, self.alg, self.values)


def resolve_potential(A, grid: Grid3):
    """Turn ``None``, a VectorField or a callable ``grid -> VectorField`` into a field."""
    if A is None:
        return None
    if isinstance(A, VectorField):
        if A.grid != grid:
            raise GridMismatch(f"potential lives on {A.grid}, requested {grid}")
        return A
    return A(grid)


# file formats

_MAGIC = b"GFLD"
_HEADER = struct.Struct("<4sIII")


def write_field(path, F: "ScalarField | VectorField") -> None:
    """Binary field file: 16-byte header then little-endian f64 data.

    Header: magic ``GFLD``, u32 ``n``, u32 ``d``, u32 component count (1 for
    a scalar field, 3 for a vector field). The half width ``L`` is not stored;
    it comes from the scenario configuration.
    """
    comps = [F] if isinstance(F, ScalarField) else list(F)
    n, d = comps[0].grid.n, comps[0].alg.dim
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, n, d, len(comps)))
        for c in comps:
            fh.write(np.ascontiguousarray(c.data, dtype="<f8").tobytes())


def read_field(path, L: float, alg: la.AlgebraSpec):
    """Inverse of :func:`write_field`; returns a ScalarField or VectorField."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise FieldFormatError(f"{path}: file too short for a field header")
    magic, n, d, ncomp = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise FieldFormatError(f"{path}: bad magic {magic!r}")
    if d != alg.dim:
        raise FieldFormatError(f"{path}: file has algebra dimension {d}, expected {alg.dim}")
    if ncomp not in (1, 3):
        raise FieldFormatError(f"{path}: unsupported component count {ncomp}")
    count = ncomp * n**3 * d
    if len(raw) != _HEADER.size + 8 * count:
        raise FieldFormatError(f"{path}: expected {count} values after the header")
    data = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).astype(float)
    grid = Grid3(L, n)
    if ncomp == 1:
        return ScalarField(grid, alg, data)
    return VectorField.from_array(grid, alg, data.reshape((3,) + grid.shape + (d,)))


def write_csv(path, F: ScalarField) -> None:
    """One row per node: ``x,y,z`` then the ``d`` coefficients."""
    pts = F.grid.points.reshape(-1, 3)
    table = np.hstack([pts, F.data.reshape(-1, F.alg.dim)])
    header = ",".join(["x", "y", "z"] + [f"c{a}" for a in range(F.alg.dim)])
    np.savetxt(path, table, delimiter=",", header=header, comments="", fmt="%.17g")
