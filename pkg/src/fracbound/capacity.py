"""Relative fractional capacity as an obstacle-constrained quadratic program.

``cap(Sigma; Omega) = min { u^T A u : u >= 1 on Sigma, u = 0 off Omega }``
over the discrete space.  The default solver is a primal-dual active set
method whose linear solves are exact (dense Cholesky) for small problems
and conjugate gradients on the Toeplitz matvec otherwise.  A projected
Barzilai-Borwein gradient method is available as an independent route.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from . import constants, gagliardo
from ._kernels import edt_squared
from .gagliardo import NonConvergence, NonlocalForm
from .geometry import E1, Direction, RasterDomain, node_points, project


@dataclass(frozen=True, eq=False)
class CapacityResult:
    value: float
    minimizer: np.ndarray
    kkt_residual: float
    active_set: np.ndarray
    iterations: int
    method: str


def _restrict(form: NonlocalForm, omega: np.ndarray) -> NonlocalForm:
    return NonlocalForm(form.s, form.h, np.asarray(omega, dtype=bool), form.kernel)


def pcg(matvec, b: np.ndarray, diag: float, tol: float = 1e-12, maxiter: int = 5000, x0=None):
    """Conjugate gradients with a constant diagonal preconditioner."""
    x = np.zeros_like(b) if x0 is None else x0.copy()
    r = b - matvec(x)
    z = r / diag
    p = z.copy()
    rz = float(r @ z)
    bn = float(np.linalg.norm(b)) or 1.0
    for it in range(1, maxiter + 1):
        if math.sqrt(float(r @ r)) <= tol * bn:
            return x, it - 1
        Ap = matvec(p)
        step = rz / float(p @ Ap)
        x += step * p
        r -= step * Ap
        z = r / diag
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    if math.sqrt(float(r @ r)) <= tol * bn:
        return x, maxiter
    raise NonConvergence(f"conjugate gradients did not reach {tol:.1e} in {maxiter} iterations")


class _System:
    """Linear algebra on the nodes of ``omega``; dense below ``dense_limit`` unknowns."""

    def __init__(self, form: NonlocalForm, dense_limit: int = 2500):
        self.form = form
        self.n = form.n
        self.dense = form.dense() if self.n <= dense_limit else None

    def matvec(self, x):
        return self.dense @ x if self.dense is not None else self.form.matvec(x)

    def solve_free(self, fixed: np.ndarray, fixed_vals: np.ndarray, tol: float, x0=None):
        """Minimise ``x^T A x`` with ``x[fixed] = fixed_vals``."""
        free = ~fixed
        x = np.zeros(self.n)
        x[fixed] = fixed_vals
        if not free.any():
            return x
        rhs = -self.matvec(x)[free]
        if self.dense is not None:
            Aff = self.dense[np.ix_(free, free)]
            x[free] = linalg.cho_solve(linalg.cho_factor(Aff), rhs)
            return x
        idx = np.flatnonzero(free)

        def mv(y):
            full = np.zeros(self.n)
            full[idx] = y
            return self.form.matvec(full)[idx]

        start = None if x0 is None else x0[free]
        x[free], _ = pcg(mv, rhs, self.form.diagonal, tol=tol, x0=start)
        return x


def capacity(sigma: np.ndarray, omega: np.ndarray, form: NonlocalForm, tol: float = 1e-10,
             method: str = "active-set", max_iter: int = 100, dense_limit: int = 2500) -> CapacityResult:
    """Discrete relative capacity of the node set ``sigma`` in ``omega``.

    ``sigma`` and ``omega`` are boolean masks on the form's box; ``form``
    supplies the stencil (its own active set is ignored).
    """
    sigma = np.asarray(sigma, dtype=bool)
    omega = np.asarray(omega, dtype=bool)
    if sigma.shape != form.shape or omega.shape != form.shape:
        raise ValueError("sigma and omega must be masks on the form's box")
    if (sigma & ~omega).any():
        raise ValueError("sigma must lie inside omega")
    if not sigma.any():
        return CapacityResult(0.0, np.zeros(form.shape), 0.0, sigma.copy(), 0, method)
    F = _restrict(form, omega)
    sys = _System(F, dense_limit)
    on_sigma = F.from_box(sigma.astype(float)) > 0.5

    if method == "projected-gradient":
        x, it = _projected_bb(sys, on_sigma, tol, max_iter=20000)
    elif method == "active-set":
        x, it = _active_set(sys, on_sigma, tol, max_iter)
    else:
        raise ValueError(f"unknown method {method!r}")
    Ax = sys.matvec(x)
    grad = 2.0 * Ax
    active = on_sigma & (x <= 1.0 + 1e-12)
    free = ~active
    scale = max(1.0, float(np.abs(grad).max()))
    kkt = max(float(np.abs(grad[free & ~on_sigma]).max(initial=0.0)),
              float(np.abs(grad[free & on_sigma]).max(initial=0.0)),
              float(np.maximum(-grad[active], 0.0).max(initial=0.0)),
              float(np.maximum(1.0 - x[on_sigma], 0.0).max(initial=0.0)) * scale) / scale
    value = float(x @ Ax)
    return CapacityResult(value, F.to_box(x), kkt, F.to_box(active.astype(float)) > 0.5, it, method)


def _active_set(sys: _System, on_sigma: np.ndarray, tol: float, max_iter: int):
    active = on_sigma.copy()
    x = None
    for it in range(1, max_iter + 1):
        x = sys.solve_free(active, np.ones(int(active.sum())), tol=min(tol, 1e-12), x0=x)
        grad = 2.0 * sys.matvec(x)
        release = active & (grad < -tol * max(1.0, np.abs(grad).max()))
        capture = on_sigma & ~active & (x < 1.0)
        if not release.any() and not capture.any():
            return x, it
        active = (active & ~release) | capture
    raise NonConvergence("active set iteration did not settle")


def _projected_bb(sys: _System, on_sigma: np.ndarray, tol: float, max_iter: int):
    """Projected gradient with Barzilai-Borwein steps onto ``{x >= 1 on sigma}``."""
    x = on_sigma.astype(float)
    g = 2.0 * sys.matvec(x)
    step = 1.0 / (2.0 * sys.form.diagonal)
    for it in range(1, max_iter + 1):
        xn = x - step * g
        xn[on_sigma] = np.maximum(xn[on_sigma], 1.0)
        gn = 2.0 * sys.matvec(xn)
        dx, dg = xn - x, gn - g
        x, g = xn, gn
        pg = g.copy()
        bind = on_sigma & (x <= 1.0) & (g > 0)
        pg[bind] = 0.0
        if float(np.abs(pg).max()) <= tol * max(1.0, float(np.abs(g).max())):
            return x, it
        sy = float(dx @ dg)
        step = float(dx @ dx) / sy if sy > 0 else step
    raise NonConvergence("projected gradient did not converge")


def point_capacity_1d(x0: float, a: float, b: float, s: float, n: int = 2049) -> float:
    """Capacity of the node nearest ``x0`` relative to ``(a, b)`` on an ``n``-node mesh."""
    s = gagliardo.check_order(s, strict_half=True)
    if not a < x0 < b:
        raise ValueError("need a < x0 < b")
    mesh = gagliardo.interval_mesh(a, b, n)
    form = gagliardo.assemble_1d(mesh, s)
    i = int(round((x0 - a) / mesh.h))
    if not mesh.mask[i]:
        raise ValueError("x0 is too close to the interval ends for this mesh")
    sigma = np.zeros(mesh.n, dtype=bool)
    sigma[i] = True
    return capacity(sigma, mesh.mask, form).value


def disk_nodes(dom: RasterDomain, center, radius: float) -> np.ndarray:
    X, Y = dom.coordinates()
    return (X - center[0]) ** 2 + (Y - center[1]) ** 2 < radius * radius


def square_nodes(dom: RasterDomain, center, half: float) -> np.ndarray:
    X, Y = dom.coordinates()
    t = 0.5 * dom.h
    return (np.abs(X - center[0]) <= half + t) & (np.abs(Y - center[1]) <= half + t)


@dataclass(frozen=True)
class MazyaReport:
    lhs: float
    rhs_core: float
    ratio: float
    capacity: float
    skipped: bool


def mazya_check(u: gagliardo.GridFunction, sigma: np.ndarray, s: float, r: float, center=(0.0, 0.0),
                R_over_r: float = 2.0, form: NonlocalForm | None = None) -> MazyaReport:
    """Regional seminorm on ``Q_r`` against ``(s / r^2) cap(Sigma; B_R) ||u||^2_{Q_r}``."""
    dom = u.dom
    sigma = np.asarray(sigma, dtype=bool)
    Q = square_nodes(dom, center, r)
    B = disk_nodes(dom, center, R_over_r * r)
    if (sigma & ~Q).any():
        raise ValueError("sigma must lie in the closed square")
    vals = u.values
    near = edt_squared(sigma) <= 2.0 + 1e-9     # sigma and its 8-neighbours
    if np.any(vals[near] != 0.0):
        raise ValueError("u must vanish on a neighbourhood of sigma")
    norm2 = float(np.sum(vals[Q] ** 2) * dom.h**2)
    if norm2 == 0.0:
        return MazyaReport(0.0, 0.0, math.nan, math.nan, True)
    form = form or gagliardo.assemble_2d(dom, s)
    lhs = gagliardo.regional_energy(vals, Q, form.stencil)
    cap = capacity(sigma, B, form).value
    rhs = s / r**2 * cap * norm2
    return MazyaReport(lhs, rhs, lhs / rhs, cap, False)


@dataclass(frozen=True)
class ProjectionBoundReport:
    capacity: float
    rhs: float
    projection_length: float
    distance: float
    holds: bool


def projection_bound_check(sigma: np.ndarray, dom: RasterDomain, s: float, r: float, center=(0.0, 0.0),
                           omega: Direction | None = None, A_dir: float | None = None,
                           form: NonlocalForm | None = None) -> ProjectionBoundReport:
    """Capacity in ``B_r`` against ``(m_s / A)(r dist)^{(1-2s)/2} |projection of Sigma|``."""
    s = gagliardo.check_order(s, strict_half=True)
    omega = omega or E1
    sigma = np.asarray(sigma, dtype=bool)
    B = disk_nodes(dom, center, r)
    if not sigma.any() or (sigma & ~B).any():
        raise ValueError("sigma must be a nonempty node set inside the disk")
    form = form or gagliardo.assemble_2d(dom, s)
    cap = capacity(sigma, B, form).value
    dist = float(np.sqrt(edt_squared(~B)[sigma].min()) * dom.h)
    pts = node_points(dom, nodes=np.argwhere(sigma))
    length = project(pts, dom.h, omega).length
    A = A_dir if A_dir is not None else 1.1 / constants.alpha(s)
    rhs = constants.morrey_m(s) / A * (r * dist) ** ((1.0 - 2.0 * s) / 2.0) * length
    return ProjectionBoundReport(cap, rhs, length, dist, cap >= rhs)
