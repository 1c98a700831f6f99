"""Discrete Gagliardo seminorms on uniform grids.

The discrete space is spanned by nodal hat functions (tensor bilinear in
2D) on an infinite lattice; a function on a raster is extended by zero.
Because the lattice is translation invariant, the Galerkin matrix of the
full-space seminorm is a Toeplitz operator ``A[i, j] = a(i - j)`` with

    a(d) = \\int |z|^{-N-2s} (2 R(d) - R(d + z) - R(d - z)) dz,

where ``R`` is the autocorrelation of the hat function (a tensor cubic
B-spline).  Near displacements are integrated with a Duffy split around
``z = 0`` and Gauss-Jacobi in the radial variable, mid-range ones with
tensor Gauss rules over the support of ``R`` and far ones with a moment
expansion.  All weights scale exactly like ``h^(N-2s)``.

Since the weights sum to zero over the lattice, the form reads

    u^T A u = sum_{i<j} w(i-j) (u_i - u_j)^2 + sum_i c_i u_i^2,

with ``w = -a`` and ``c_i`` the interaction of node ``i`` with every
lattice node outside the active set.  The nearest-neighbour weight turns
negative below ``s`` of about 0.237 in 1D and about 0.585 in 2D (the
nodal basis is not a positive scheme there), so exact sub-modularity of
the discrete form holds only above those thresholds.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Callable, Sequence

import numpy as np
import scipy.fft as sfft
from scipy import integrate, ndimage, special

from . import _kernels
from .geometry import Direction, RasterDomain


class NonConvergence(RuntimeError):
    """An iterative or adaptive routine ran out of budget."""


def check_order(s: float, strict_half: bool = False) -> float:
    s = float(s)
    if not 0.0 < s < 1.0:
        raise ValueError(f"fractional order must lie in (0, 1), got {s}")
    if strict_half and s <= 0.5:
        raise ValueError(f"this operation needs s > 1/2, got {s}")
    return s


def fourier_normalization(n: int, s: float) -> float:
    """Constant ``C`` with ``(-Delta)^s`` having symbol ``|xi|^2s`` when the
    kernel is ``C |z|^{-n-2s}``; then ``[u]^2 = (2/C) int |xi|^{2s} |u^|^2 dxi/(2 pi)^n``."""
    return s * 4.0**s * special.gamma(0.5 * n + s) / (np.pi ** (0.5 * n) * special.gamma(1.0 - s))


# --------------------------------------------------------------------------
# basis autocorrelation
# --------------------------------------------------------------------------

def bspline3(t):
    """Autocorrelation of the unit hat function: centred cubic B-spline on [-2, 2]."""
    t = np.abs(np.asarray(t, dtype=float))
    inner = 2.0 / 3.0 - t**2 + 0.5 * t**3
    outer = (2.0 - t) ** 3 / 6.0
    return np.where(t < 1.0, inner, np.where(t < 2.0, outer, 0.0))


def _R2(v1, v2, h):
    return h * h * bspline3(v1 / h) * bspline3(v2 / h)


def _R1(v, h):
    return h * bspline3(v / h)


@lru_cache(maxsize=None)
def _gauss(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def _gauss_jacobi(n: int, beta: float):
    """Nodes/weights on [0, 1] for the weight ``u^beta``."""
    x, w = special.roots_jacobi(n, 0.0, beta)
    return 0.5 * (x + 1.0), w / 2.0 ** (beta + 1.0)


@lru_cache(maxsize=None)
def _corner_integral(s: float) -> float:
    """``int_0^{pi/4} cos^{2s}(theta) d theta``."""
    x, w = _gauss(48)
    th = x * np.pi / 4
    return float(np.sum(w * np.cos(th) ** (2 * s)) * np.pi / 4)


# --------------------------------------------------------------------------
# 2D weights
# --------------------------------------------------------------------------

def near_weight_2d(d: Sequence[int], s: float, h: float = 1.0, nq: int = 16,
                   nj: int = 10, nv: int = 28) -> float:
    """Galerkin entry ``a(d)`` by singular quadrature in physical units."""
    d1, d2 = float(d[0]) * h, float(d[1]) * h
    alpha = 2.0 + 2.0 * s
    L = int(max(abs(d[0]), abs(d[1]))) + 2
    Rd = _R2(d1, d2, h)
    total = 2.0 * Rd * (4.0 / s) * (L * h) ** (-2.0 * s) * _corner_integral(s)

    # regular unit cells of [-L, L]^2
    cells = [(a, b) for a in range(-L, L) for b in range(-L, L) if not (a in (-1, 0) and b in (-1, 0))]
    cells = np.asarray(cells, dtype=float)
    x, w = _gauss(nq)
    X, Y = np.meshgrid(x, x, indexing="ij")
    W = np.outer(w, w)
    z1 = h * (cells[:, 0, None, None] + X[None])
    z2 = h * (cells[:, 1, None, None] + Y[None])
    F = 2.0 * Rd - _R2(d1 + z1, d2 + z2, h) - _R2(d1 - z1, d2 - z2, h)
    total += float(np.sum(F * (z1 * z1 + z2 * z2) ** (-alpha / 2) * W[None]) * h * h)

    # the four cells touching the singularity: Duffy split, u^(1-2s) Gauss-Jacobi
    beta = 1.0 - 2.0 * s
    u, wu = _gauss_jacobi(nj, beta)
    v, wv = _gauss(nv)
    U, V = np.meshgrid(u, v, indexing="ij")
    Wt = np.outer(wu, wv) * (1.0 + V * V) ** (-alpha / 2)
    up = h * U
    for s1 in (-1.0, 1.0):
        for s2 in (-1.0, 1.0):
            for tri in (0, 1):
                if tri == 0:
                    z1, z2 = s1 * up, s2 * up * V
                else:
                    z1, z2 = s1 * up * V, s2 * up
                F = 2.0 * Rd - _R2(d1 + z1, d2 + z2, h) - _R2(d1 - z1, d2 - z2, h)
                total += float(np.sum(F / (up * up) * Wt)) * h ** (beta + 1.0) * h ** (2.0 - alpha) * h
    return total


def mid_weights_2d(disp: np.ndarray, s: float, h: float = 1.0, nq: int = 8) -> np.ndarray:
    """``a(d) = -2 int R(v) |d - v|^{-2-2s} dv`` for displacements off the support of ``R``."""
    disp = np.asarray(disp, dtype=float).reshape(-1, 2) * h
    alpha = 2.0 + 2.0 * s
    x, w = _gauss(nq)
    X, Y = np.meshgrid(x, x, indexing="ij")
    W = np.outer(w, w).ravel()
    pts = []
    wts = []
    for a in range(-2, 2):
        for b in range(-2, 2):
            v1 = h * (a + X.ravel())
            v2 = h * (b + Y.ravel())
            pts.append(np.column_stack([v1, v2]))
            wts.append(W * _R2(v1, v2, h) * h * h)
    pts = np.vstack(pts)
    wts = np.concatenate(wts)
    out = np.empty(len(disp))
    for k0 in range(0, len(disp), 2048):
        dd = disp[k0:k0 + 2048]
        r2 = (dd[:, None, 0] - pts[None, :, 0]) ** 2 + (dd[:, None, 1] - pts[None, :, 1]) ** 2
        out[k0:k0 + 2048] = -2.0 * (r2 ** (-alpha / 2) @ wts)
    return out


def asymptotic_weights_2d(disp: np.ndarray, s: float, h: float = 1.0) -> np.ndarray:
    """Moment expansion of ``mid_weights_2d`` to fourth order."""
    disp = np.asarray(disp, dtype=float).reshape(-1, 2) * h
    a = 2.0 + 2.0 * s
    x2 = disp[:, 0] ** 2
    y2 = disp[:, 1] ** 2
    r2 = x2 + y2
    f = r2 ** (-a / 2)
    lap = a * a * f / r2
    c = a * (a + 2.0) * f / r2**4
    dx4 = c * ((a * a + 4 * a + 3) * x2 * x2 - (6 * a + 18) * x2 * y2 + 3 * y2 * y2)
    dy4 = c * ((a * a + 4 * a + 3) * y2 * y2 - (6 * a + 18) * x2 * y2 + 3 * x2 * x2)
    dxy = -c * ((a + 3) * (x2 * x2 + y2 * y2) - (a * a + 8 * a + 18) * x2 * y2)
    m2 = h * h / 3.0
    m4 = 0.3 * h**4
    m22 = h**4 / 9.0
    conv = f + 0.5 * m2 * lap + (m4 * (dx4 + dy4) + 6.0 * m22 * dxy) / 24.0
    return -2.0 * conv * h**4


@lru_cache(maxsize=64)
def _unit_table_2d(s: float, L: int, near: int, far: int) -> np.ndarray:
    """``a(p, q)`` for ``0 <= p, q <= L`` at ``h = 1``."""
    T = np.zeros((L + 1, L + 1))
    nr = min(near, L)
    for p in range(nr + 1):
        for q in range(p + 1):
            T[p, q] = T[q, p] = near_weight_2d((p, q), s)
    idx = [(p, q) for p in range(L + 1) for q in range(p + 1) if max(p, q) > near]
    if idx:
        idx = np.asarray(idx)
        m = idx.max(axis=1) <= far
        vals = np.empty(len(idx))
        if m.any():
            vals[m] = mid_weights_2d(idx[m], s)
        if (~m).any():
            vals[~m] = asymptotic_weights_2d(idx[~m], s)
        T[idx[:, 0], idx[:, 1]] = vals
        T[idx[:, 1], idx[:, 0]] = vals
    T.setflags(write=False)
    return T


def kernel_2d(s: float, shape: tuple[int, int], h: float = 1.0, near: int = 4, far: int = 16) -> np.ndarray:
    """Array ``K[dy + ny - 1, dx + nx - 1] = a(dx, dy)`` for a box of ``shape = (ny, nx)`` nodes."""
    s = check_order(s)
    ny, nx = shape
    L = max(ny, nx) - 1
    T = _unit_table_2d(s, L, near, far)
    dy = np.abs(np.arange(-(ny - 1), ny))
    dx = np.abs(np.arange(-(nx - 1), nx))
    return T[np.ix_(dy, dx)] * h ** (2.0 - 2.0 * s)


# --------------------------------------------------------------------------
# 1D weights
# --------------------------------------------------------------------------

def near_weight_1d(d: int, s: float, h: float = 1.0, nq: int = 20, nj: int = 10) -> float:
    beta_k = 1.0 + 2.0 * s
    dd = float(d) * h
    L = abs(int(d)) + 2
    Rd = _R1(dd, h)
    total = 2.0 * Rd * (L * h) ** (-2.0 * s) / s
    x, w = _gauss(nq)
    cells = np.asarray([a for a in range(-L, L) if a not in (-1, 0)], dtype=float)
    z = h * (cells[:, None] + x[None])
    F = 2.0 * Rd - _R1(dd + z, h) - _R1(dd - z, h)
    total += float(np.sum(F * np.abs(z) ** (-beta_k) * w[None]) * h)
    gb = 1.0 - 2.0 * s
    u, wu = _gauss_jacobi(nj, gb)
    for sg in (-1.0, 1.0):
        z = sg * h * u
        F = 2.0 * Rd - _R1(dd + z, h) - _R1(dd - z, h)
        total += float(np.sum(F / z**2 * wu)) * h ** (gb + 1.0) * h ** (1.0 - beta_k)
    return total


def mid_weights_1d(disp: np.ndarray, s: float, h: float = 1.0, nq: int = 12) -> np.ndarray:
    disp = np.asarray(disp, dtype=float).ravel() * h
    b = 1.0 + 2.0 * s
    x, w = _gauss(nq)
    v = np.concatenate([h * (a + x) for a in range(-2, 2)])
    wt = np.concatenate([w for _ in range(-2, 2)]) * _R1(v, h) * h
    return -2.0 * (np.abs(disp[:, None] - v[None]) ** (-b) @ wt)


def asymptotic_weights_1d(disp: np.ndarray, s: float, h: float = 1.0) -> np.ndarray:
    d = np.abs(np.asarray(disp, dtype=float).ravel()) * h
    b = 1.0 + 2.0 * s
    f = d ** (-b)
    conv = f * (1.0 + (h * h / 6.0) * b * (b + 1) / d**2
                + (0.3 * h**4 / 24.0) * b * (b + 1) * (b + 2) * (b + 3) / d**4)
    return -2.0 * conv * h * h


@lru_cache(maxsize=64)
def _unit_table_1d(s: float, L: int, near: int, far: int) -> np.ndarray:
    T = np.zeros(L + 1)
    for p in range(min(near, L) + 1):
        T[p] = near_weight_1d(p, s)
    p = np.arange(L + 1)
    m = (p > near) & (p <= far)
    if m.any():
        T[m] = mid_weights_1d(p[m], s)
    m = p > max(near, far)
    if m.any():
        T[m] = asymptotic_weights_1d(p[m], s)
    T.setflags(write=False)
    return T


def kernel_1d(s: float, n: int, h: float = 1.0, near: int = 4, far: int = 32) -> np.ndarray:
    s = check_order(s)
    T = _unit_table_1d(s, n - 1, near, far)
    return T[np.abs(np.arange(-(n - 1), n))] * h ** (1.0 - 2.0 * s)


# --------------------------------------------------------------------------
# the discrete form
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Mesh1D:
    """Uniform 1D node set ``x_i = origin + i h`` with an activity mask."""

    origin: float
    h: float
    mask: np.ndarray

    @property
    def n(self) -> int:
        return len(self.mask)

    def coordinates(self) -> np.ndarray:
        return self.origin + self.h * np.arange(self.n)


def interval_mesh(a: float, b: float, n: int) -> Mesh1D:
    """``n`` nodes on ``[a, b]``; both end nodes are inactive."""
    if n < 3 or not b > a:
        raise ValueError("need n >= 3 and a < b")
    mask = np.ones(n, dtype=bool)
    mask[0] = mask[-1] = False
    return Mesh1D(float(a), (b - a) / (n - 1), mask)


_MASS_1D = np.array([1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0])


@dataclass(frozen=True, eq=False)
class NonlocalForm:
    """Quadratic form of the discrete seminorm on an active node set.

    ``kernel`` holds ``a(d)`` for every displacement inside the box; the
    diagonal entry is ``a(0)``.  With ``region`` set the form is the
    regional one: only pairs with both nodes in the region contribute.
    """

    s: float
    h: float
    active: np.ndarray
    kernel: np.ndarray
    region: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return self.active.ndim

    @property
    def shape(self) -> tuple[int, ...]:
        return self.active.shape

    @property
    def mass(self) -> float:
        """Lumped mass per node (``h^N``)."""
        return self.h ** self.dim

    @cached_property
    def index(self) -> np.ndarray:
        return np.flatnonzero(self.active.ravel())

    @property
    def n(self) -> int:
        return len(self.index)

    @property
    def diagonal(self) -> float:
        return float(self.kernel[tuple(c // 2 for c in self.kernel.shape)])

    @cached_property
    def stencil(self) -> np.ndarray:
        """Pair weights ``w(d) = -a(d)``, zero at ``d = 0``."""
        w = -self.kernel.copy()
        w[tuple(c // 2 for c in w.shape)] = 0.0
        return w

    @cached_property
    def _kernel_hat(self) -> np.ndarray:
        # a(d) stored at index d mod 2*shape: circulant embedding of the Toeplitz matrix
        size = tuple(2 * n for n in self.shape)
        center = tuple(c // 2 for c in self.kernel.shape)
        rolled = np.zeros(size)
        rolled[tuple(slice(0, c) for c in self.kernel.shape)] = self.kernel
        rolled = np.roll(rolled, tuple(-c for c in center), axis=tuple(range(self.dim)))
        return sfft.rfftn(rolled)

    def mass_matvec(self, x: np.ndarray) -> np.ndarray:
        """Consistent multilinear mass matrix applied to an active vector."""
        u = self.to_box(x)
        for ax in range(self.dim):
            u = ndimage.correlate1d(u, _MASS_1D, axis=ax, mode="constant")
        return (self.h**self.dim) * u.ravel()[self.index]

    def mass_dense(self) -> np.ndarray:
        sub = np.unravel_index(self.index, self.shape)
        M = np.full((self.n, self.n), self.h**self.dim)
        for k in range(self.dim):
            d = np.abs(sub[k][:, None] - sub[k][None, :])
            M *= np.where(d == 0, _MASS_1D[1], np.where(d == 1, _MASS_1D[0], 0.0))
        return M

    def to_box(self, x: np.ndarray) -> np.ndarray:
        out = np.zeros(self.active.size)
        out[self.index] = x
        return out.reshape(self.shape)

    def from_box(self, u: np.ndarray) -> np.ndarray:
        return np.asarray(u, dtype=float).ravel()[self.index]

    def _as_vector(self, u) -> np.ndarray:
        if isinstance(u, GridFunction):
            u = u.values
        u = np.asarray(u, dtype=float)
        if u.shape == self.shape:
            return self.from_box(u)
        if u.shape == (self.n,):
            return u
        raise ValueError(f"function shape {u.shape} matches neither the box {self.shape} nor {self.n} nodes")

    def box_matvec(self, u: np.ndarray) -> np.ndarray:
        """Toeplitz product ``sum_j a(i - j) u_j`` evaluated on the whole box."""
        size = tuple(2 * n for n in self.shape)
        y = sfft.irfftn(sfft.rfftn(u, s=size) * self._kernel_hat, s=size)
        return y[tuple(slice(0, n) for n in self.shape)]

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.box_matvec(self.to_box(x)).ravel()[self.index]

    def dense(self) -> np.ndarray:
        """Dense matrix on the active nodes (full-space form)."""
        sub = np.unravel_index(self.index, self.shape)
        center = [c // 2 for c in self.kernel.shape]
        diff = tuple(sub[k][:, None] - sub[k][None, :] + center[k] for k in range(self.dim))
        return self.kernel[diff]

    @cached_property
    def exterior_diag(self) -> np.ndarray:
        """Interaction of each active node with all lattice nodes outside the box."""
        inside = self.box_matvec(np.ones(self.shape))
        return inside.ravel()[self.index]

    @cached_property
    def killing(self) -> np.ndarray:
        """``c_i``: interaction of active node ``i`` with every inactive lattice node."""
        return self.matvec(np.ones(self.n))

    def evaluate(self, u) -> float:
        """Value of the form at ``u`` (box array, active vector or :class:`GridFunction`)."""
        if self.region is not None:
            box = u.values if isinstance(u, GridFunction) else np.asarray(u, dtype=float)
            if box.shape != self.shape:
                box = self.to_box(box)
            return regional_energy(box, self.region, self.stencil)
        x = self._as_vector(u)
        return float(x @ self.matvec(x))

    def with_region(self, region: np.ndarray | None) -> "NonlocalForm":
        return NonlocalForm(self.s, self.h, self.active, self.kernel,
                            None if region is None else np.asarray(region, dtype=bool))


def regional_energy(u: np.ndarray, region: np.ndarray, stencil: np.ndarray) -> float:
    """``sum_{i<j in region} w(i-j) (u_i - u_j)^2`` with the window cut to the region's extent."""
    region = np.asarray(region, dtype=bool)
    if not region.any():
        return 0.0
    if u.ndim == 1:
        u = u[None, :]
        region = region[None, :]
        stencil = stencil[None, :]
    rows = np.flatnonzero(region.any(axis=1))
    cols = np.flatnonzero(region.any(axis=0))
    sl = (slice(rows[0], rows[-1] + 1), slice(cols[0], cols[-1] + 1))
    ub, rb = u[sl], region[sl]
    ey, ex = rb.shape
    cy, cx = (stencil.shape[0] - 1) // 2, (stencil.shape[1] - 1) // 2
    w = stencil[cy - min(cy, ey - 1): cy + min(cy, ey - 1) + 1, cx - min(cx, ex - 1): cx + min(cx, ex - 1) + 1]
    return _kernels.pair_energy(ub, rb, w)


def assemble_2d(dom: RasterDomain, s: float, region: np.ndarray | None = None,
                near: int = 4, far: int = 16, remove_punctures: bool = False) -> NonlocalForm:
    """Form of the full-space seminorm for functions supported on the raster's inside nodes."""
    s = check_order(s)
    mask = dom.mask & ~dom.puncture_mask() if remove_punctures else dom.mask
    K = kernel_2d(s, mask.shape, dom.h, near, far)
    return NonlocalForm(s, dom.h, mask, K, None if region is None else np.asarray(region, dtype=bool))


def assemble_1d(mesh: Mesh1D, s: float, region: np.ndarray | None = None,
                near: int = 4, far: int = 32) -> NonlocalForm:
    s = check_order(s)
    K = kernel_1d(s, mesh.n, mesh.h, near, far)
    return NonlocalForm(s, mesh.h, np.asarray(mesh.mask, dtype=bool), K,
                        None if region is None else np.asarray(region, dtype=bool))


def exterior_kappa_1d(x, a: float, b: float, s: float):
    """``int_{R minus (a, b)} |x - y|^{-1-2s} dy`` in closed form."""
    x = np.asarray(x, dtype=float)
    return ((x - a) ** (-2 * s) + (b - x) ** (-2 * s)) / (2 * s)


# --------------------------------------------------------------------------
# grid functions and derived quantities
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GridFunction:
    """Nodal values on a raster, identically zero off the mask."""

    dom: RasterDomain
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.dom.mask.shape:
            raise ValueError("values must have the raster's shape")
        if not np.all(np.isfinite(v)):
            raise ValueError("values must be finite")
        object.__setattr__(self, "values", np.where(self.dom.mask, v, 0.0))

    @classmethod
    def from_callable(cls, dom: RasterDomain, fn: Callable) -> "GridFunction":
        X, Y = dom.coordinates()
        return cls(dom, fn(X, Y))

    def l2_squared(self) -> float:
        return float(np.sum(self.values**2) * self.dom.h**2)


def evaluate(form: NonlocalForm, u) -> float:
    return form.evaluate(u)


def directional_seminorm(u: GridFunction, direction: Direction, s: float) -> float:
    """Discrete ``int int |u(x) - u(x + rho w)|^2 / |rho|^{1+2s} d rho dx``.

    Axis directions use the 1D form on every grid line; other directions
    resample ``u`` bilinearly along lines of spacing ``h`` (approximate).
    """
    s = check_order(s)
    vals = u.values
    h = u.dom.h
    w1, w2 = direction.omega
    if direction.axis_aligned:
        lines = vals if w2 == 0.0 else vals.T
        n = lines.shape[1]
        K = kernel_1d(s, n, h)
        size = 2 * n
        Kw = np.zeros(size)
        Kw[: 2 * n - 1] = K
        Kh = sfft.rfft(np.roll(Kw, -(n - 1)))
        Au = sfft.irfft(sfft.rfft(lines, n=size, axis=1) * Kh[None], n=size, axis=1)[:, :n]
        return float(np.sum(lines * Au) * h)

    ny, nx = vals.shape
    diag = int(np.ceil(np.hypot(nx, ny))) + 2
    t = np.arange(-diag, diag + 1)
    center = np.array([(nx - 1) / 2, (ny - 1) / 2])
    perp = np.array([-w2, w1])
    offs = np.arange(-diag, diag + 1)
    P = center[None, None, :] + offs[:, None, None] * perp + t[None, :, None] * np.array([w1, w2])
    lines = ndimage.map_coordinates(vals, [P[..., 1].ravel(), P[..., 0].ravel()], order=1, cval=0.0).reshape(P.shape[:2])
    lines = lines[np.abs(lines).max(axis=1) > 0]
    if lines.size == 0:
        return 0.0
    n = lines.shape[1]
    K = kernel_1d(s, n, h)
    size = 2 * n
    Kw = np.zeros(size)
    Kw[: 2 * n - 1] = K
    Kh = sfft.rfft(np.roll(Kw, -(n - 1)))
    Au = sfft.irfft(sfft.rfft(lines, n=size, axis=1) * Kh[None], n=size, axis=1)[:, :n]
    return float(np.sum(lines * Au) * h)


def average(u: GridFunction | np.ndarray, E: np.ndarray) -> float:
    """Lumped-mass average of ``u`` over the node set ``E``."""
    vals = u.values if isinstance(u, GridFunction) else np.asarray(u, dtype=float)
    E = np.asarray(E, dtype=bool)
    if not E.any():
        raise ValueError("average over an empty node set")
    return float(vals[E].mean())


# --------------------------------------------------------------------------
# seminorms of closed-form functions by adaptive quadrature
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class AnalyticFunction:
    """Closed-form function with known support and singular points.

    ``fn`` must be vectorised.  In 1D ``support = (a, b)``; in 2D
    ``support = ((a, b), (c, d))`` and ``fn`` takes ``(x, y)``.  An optional
    ``scalar`` version of a 1D ``fn`` speeds up adaptive quadrature.
    """

    fn: Callable
    support: tuple
    singular: tuple = ()
    dim: int = 1
    scalar: Callable | None = None

    def at(self, x: float) -> float:
        if self.scalar is not None:
            return self.scalar(x)
        return float(self.fn(np.asarray(x)))

    def rescaled(self, t: float) -> "AnalyticFunction":
        """``x -> f(x / t)``."""
        f = self.fn
        if self.dim == 1:
            a, b = self.support
            g = self.scalar
            return AnalyticFunction(lambda x: f(x / t), (t * a, t * b), tuple(t * p for p in self.singular), 1,
                                    None if g is None else (lambda x: g(x / t)))
        (a, b), (c, d) = self.support
        return AnalyticFunction(lambda x, y: f(x / t, y / t), ((t * a, t * b), (t * c, t * d)), (), 2)


def _quad(fn, a, b, points, epsabs, epsrel, limit=400, **kw):
    """``quad`` over ``[a, b]`` split at ``points``; warnings are dropped because
    callers judge convergence from the returned error estimate."""
    pts = sorted({p for p in points if a < p < b})
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        if kw:
            out = [integrate.quad(fn, lo, hi, epsabs=epsabs, epsrel=epsrel, limit=limit, **kw)
                   for lo, hi in zip([a] + pts, pts + [b])]
            return sum(v for v, _ in out), sum(e for _, e in out)
        return integrate.quad(fn, a, b, points=pts or None, epsabs=epsabs, epsrel=epsrel, limit=limit)


def l2_squared_analytic(f: AnalyticFunction, tol: float = 1e-10) -> float:
    if f.dim == 1:
        a, b = f.support
        return _quad(lambda x: float(f.fn(np.asarray(x))) ** 2, a, b, f.singular, tol, 1e-12)[0]
    (a, b), (c, d) = f.support
    val, _ = integrate.dblquad(lambda y, x: float(f.fn(np.asarray(x), np.asarray(y))) ** 2, a, b, c, d,
                               epsabs=tol, epsrel=1e-10)
    return val


def seminorm_of_analytic(f: AnalyticFunction, s: float, tol: float = 1e-7, max_level: int = 7) -> float:
    """``[f]^2`` over the whole space by adaptive quadrature of the double integral."""
    s = check_order(s)
    if f.dim == 1:
        return _seminorm_1d(f, s, tol)
    if f.dim == 2:
        return _seminorm_2d(f, s, tol, max_level)
    raise ValueError("only dimensions 1 and 2 are supported")


def _wynn(partial: list[float]) -> tuple[float, float]:
    """Wynn epsilon extrapolation of a sequence of partial sums; returns (limit, error estimate)."""
    prev = [0.0] * (len(partial) + 1)
    cur = list(partial)
    estimates = [partial[-1]]
    odd = False
    while len(cur) > 1:
        nxt = []
        for k in range(len(cur) - 1):
            diff = cur[k + 1] - cur[k]
            ok = np.isfinite(diff) and diff != 0.0
            nxt.append(prev[k + 1] + 1.0 / diff if ok else math.inf)
        prev, cur = cur, nxt
        odd = not odd
        if not odd and all(np.isfinite(cur)):
            estimates.append(cur[-1])
    if len(estimates) < 2:
        return estimates[-1], abs(partial[-1] - partial[-2])
    return estimates[-1], abs(estimates[-1] - estimates[-2])


def _seminorm_1d(f: AnalyticFunction, s: float, tol: float) -> float:
    """``2 int_0^L z^{-1-2s} D(z) dz`` plus the exterior part, ``D`` the box-restricted
    squared-difference correlation.

    Near ``z = 0`` the integral is summed over geometric shells and the
    partial sums are extrapolated, so that ``D`` is never needed where
    cancellation would swamp it.
    """
    a, b = f.support
    L = b - a
    sing = sorted(set(f.singular) | {a, b})
    fn = f.at

    def D(z):
        # structure of width z sits next to every singular point and its shifts
        shifted = [p + c * z for p in sing for c in (-2.0, -1.0, 1.0)]
        v, _ = _quad(lambda x: (fn(x + z) - fn(x)) ** 2, a, b - z,
                     sing + shifted, 1e-14 * z * z, 1e-10, limit=800)
        return v

    breaks = sorted({abs(p - q) for p in sing for q in sing if 0.0 < abs(p - q) < L})
    z1 = min([0.25 * L] + breaks)
    outer, err = _quad(lambda z: z ** (-1.0 - 2.0 * s) * D(z), z1, L, breaks, 0.05 * tol, 1e-9, limit=800)

    # shells [z1 rho^{k+1}, z1 rho^k] in log z
    rho, shells = 0.5, 22
    xg, wg = _gauss(10)
    partial, acc = [], 0.0
    for k in range(shells):
        lo = math.log(z1) + (k + 1) * math.log(rho)
        u = lo - math.log(rho) * xg
        z = np.exp(u)
        inc = -math.log(rho) * sum(w * zi ** (-2.0 * s) * D(zi) for w, zi in zip(wg, z))
        acc += inc
        partial.append(acc)
        if k >= 8 and abs(inc) < 0.01 * tol:
            break   # finer shells would only add cancellation noise
    head, err_head = _wynn(partial)
    # agreement with the extrapolation that ignores the two finest shells
    err += max(err_head, abs(head - _wynn(partial[:-2])[0]))
    if not np.isfinite(head + outer) or err > tol:
        raise NonConvergence(f"double integral did not converge (error estimate {err:.2e})")

    ext, err2 = _quad(lambda x: fn(x) ** 2 * ((x - a) ** (-2 * s) + (b - x) ** (-2 * s)) / (2 * s),
                      a, b, sing, 0.1 * tol, 1e-11, limit=800)
    if err2 > tol:
        raise NonConvergence(f"exterior integral did not converge (error estimate {err2:.2e})")
    return 2.0 * (head + outer) + 2.0 * ext


def _seminorm_2d(f: AnalyticFunction, s: float, tol: float, max_level: int) -> float:
    """Polar integration of ``|z|^{-2-2s} D(z)`` with ``D`` the squared-difference correlation."""
    (a, b), (c, d) = f.support
    fn = f.fn
    diam = float(np.hypot(b - a, d - c))

    def estimate(level: int) -> float:
        nx = 8 * 2**level
        xg, wg = _gauss(4)
        ex = np.linspace(a, b, nx + 1)
        ey = np.linspace(c, d, nx + 1)
        # composite Gauss on the support, extended so that x + z stays covered
        X = (ex[:-1, None] + np.diff(ex)[:, None] * xg[None]).ravel()
        Wx = (np.diff(ex)[:, None] * wg[None]).ravel()
        Y = (ey[:-1, None] + np.diff(ey)[:, None] * xg[None]).ravel()
        Wy = (np.diff(ey)[:, None] * wg[None]).ravel()
        XX, YY = np.meshgrid(X, Y, indexing="ij")
        WW = np.outer(Wx, Wy)
        f0 = fn(XX, YY)
        norm2 = float(np.sum(WW * f0**2))
        # D(z) = 2||f||^2 - 2 int f(x) f(x+z) dx for compactly supported f
        nth = 8 * 2**level
        th = (np.arange(nth) + 0.5) * np.pi / nth
        nrad = 6 + 2 * level
        edges = diam * 2.0 ** (-np.arange(nrad, -1, -1) * 1.0)
        edges = np.concatenate([[0.0], edges])
        rg, rw = _gauss(6)
        total = 0.0
        for r0, r1 in zip(edges[:-1], edges[1:]):
            rho = r0 + (r1 - r0) * rg
            wr = (r1 - r0) * rw
            for t in th:
                z1 = rho * np.cos(t)
                z2 = rho * np.sin(t)
                cross = np.array([np.sum(WW * f0 * fn(XX + z1k, YY + z2k)) for z1k, z2k in zip(z1, z2)])
                Dz = 2.0 * norm2 - 2.0 * cross
                total += np.sum(wr * rho ** (-1.0 - 2.0 * s) * Dz) * (np.pi / nth)
        total *= 2.0
        total += 2.0 * norm2 * 2.0 * np.pi * diam ** (-2.0 * s) / (2.0 * s)
        return total

    prev = estimate(0)
    for level in range(1, max_level + 1):
        cur = estimate(level)
        if abs(cur - prev) <= tol * max(1.0, abs(cur)):
            return cur
        prev = cur
    raise NonConvergence("2D seminorm quadrature did not settle within the refinement budget")
