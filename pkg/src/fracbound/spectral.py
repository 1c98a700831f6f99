"""First Dirichlet eigenvalue of the discrete seminorm and trial-function upper bounds.

The discrete eigenvalue is the minimum of ``u^T A u / u^T M u`` over the
multilinear nodal space on the active nodes, with ``A`` the Galerkin
matrix of the seminorm and ``M`` the consistent mass matrix.  It is
therefore the exact Rayleigh quotient of an admissible function and an
upper bound for the continuum eigenvalue of the covered region.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import linalg, special

from . import constants, gagliardo
from .capacity import pcg
from .gagliardo import AnalyticFunction, NonConvergence, NonlocalForm
from .geometry import RasterDomain, distance_to_complement, largest_rectangle


class NoActiveNodes(ValueError):
    """The form has no unknowns."""


class InadmissibleTrial(ValueError):
    """A trial function is not supported in the domain or violates its parameter range."""


@dataclass(frozen=True, eq=False)
class EigResult:
    lam: float
    vector: np.ndarray
    iterations: int
    residual: float
    method: str

    def rayleigh(self, form: NonlocalForm) -> float:
        x = form.from_box(self.vector)
        return float(x @ form.matvec(x)) / float(x @ form.mass_matvec(x))


def _normalize_sign(x: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(np.abs(x) > 1e-14 * np.abs(x).max())
    return -x if nz.size and x[nz[0]] < 0 else x


def smallest_eigenvalue(form: NonlocalForm, tol: float = 1e-8, dense_limit: int = 2500,
                        max_iter: int = 500) -> EigResult:
    """Smallest eigenvalue of ``A u = lambda M u`` on the active nodes.

    ``residual`` is ``||A u - lambda M u|| / (lambda ||M u||)``.
    """
    n = form.n
    if n == 0:
        raise NoActiveNodes("the domain has no active node")
    if n <= dense_limit:
        A, M = form.dense(), form.mass_dense()
        w, v = linalg.eigh(A, M, subset_by_index=[0, 0])
        x, lam, it, method = v[:, 0], float(w[0]), 0, "dense"
    else:
        x, lam, it = _inverse_iteration(form, tol, max_iter)
        method = "inverse-iteration"
    x = _normalize_sign(x / math.sqrt(float(x @ form.mass_matvec(x))))
    Mx = form.mass_matvec(x)
    res = float(np.linalg.norm(form.matvec(x) - lam * Mx) / (lam * np.linalg.norm(Mx)))
    if res > tol:
        raise NonConvergence(f"eigen-residual {res:.2e} above {tol:.1e}")
    return EigResult(lam, form.to_box(x), it, res, method)


def _inverse_iteration(form: NonlocalForm, tol: float, max_iter: int):
    x = np.ones(form.n)
    x /= math.sqrt(float(x @ form.mass_matvec(x)))
    lam = float(x @ form.matvec(x))
    for it in range(1, max_iter + 1):
        Mx = form.mass_matvec(x)
        # A y = M x; y is close to x / lam, which makes a good start
        y, _ = pcg(form.matvec, Mx, form.diagonal, tol=min(1e-3 * tol, 1e-11), maxiter=20000, x0=x / lam)
        x = y / math.sqrt(float(y @ form.mass_matvec(y)))
        Ax, Mx = form.matvec(x), form.mass_matvec(x)
        lam = float(x @ Ax)
        if np.linalg.norm(Ax - lam * Mx) <= tol * lam * np.linalg.norm(Mx):
            return x, lam, it
    raise NonConvergence("inverse iteration did not converge")


def eigenvalue(dom: RasterDomain, s: float, tol: float = 1e-8, remove_punctures: bool = False) -> EigResult:
    return smallest_eigenvalue(gagliardo.assemble_2d(dom, s, remove_punctures=remove_punctures), tol)


# --------------------------------------------------------------------------
# trial functions
# --------------------------------------------------------------------------

def dyda_profile(s: float) -> AnalyticFunction:
    """``(1 - x^2)_+^s`` on ``[-1, 1]``."""
    fn = lambda x: np.where(np.abs(x) < 1.0, np.abs(1.0 - np.minimum(x * x, 1.0)) ** s, 0.0)

    def scalar(x):
        return (1.0 - x * x) ** s if abs(x) < 1.0 else 0.0

    return AnalyticFunction(fn, (-1.0, 1.0), (), 1, scalar)


def dyda_quotient(s: float, dim: int) -> float:
    """Exact Rayleigh quotient of ``(1 - |x|^2)_+^s`` on the unit ball.

    Its fractional Laplacian is constant on the ball, which gives the
    seminorm in closed form.
    """
    kappa = 4.0**s * special.gamma(1.0 + s) * special.gamma(0.5 * dim + s) / special.gamma(0.5 * dim)
    C = gagliardo.fourier_normalization(dim, s)
    # int (1-|x|^2)^a over the unit ball = pi^{N/2} Gamma(a+1) / Gamma(a+1+N/2)
    ball = lambda a: math.pi ** (0.5 * dim) * special.gamma(a + 1.0) / special.gamma(a + 1.0 + 0.5 * dim)
    return float((2.0 / C) * kappa * ball(s) / ball(2.0 * s))


def bump() -> AnalyticFunction:
    """Smooth bump ``exp(1 - 1/(1 - x^2))`` on ``[-1, 1]`` with maximum 1."""
    def scalar(x):
        return math.exp(1.0 - 1.0 / (1.0 - x * x)) if abs(x) < 1.0 else 0.0

    fn = np.vectorize(scalar, otypes=[float])
    return AnalyticFunction(fn, (-1.0, 1.0), (), 1, scalar)


def profile_quotient(f: AnalyticFunction, s: float, tol: float = 1e-8) -> float:
    """``[f]^2 / ||f||^2`` for a 1D profile, both by adaptive quadrature."""
    return gagliardo.seminorm_of_analytic(f, s, tol) / gagliardo.l2_squared_analytic(f)


@dataclass(frozen=True)
class TrialDescriptor:
    """A trial function and its parameters.

    kinds: ``scaled_bump`` (``n``, ``dim``, ``center``), ``funnel`` (``s``,
    ``eps``, ``n``), ``product`` (``rect`` = ``(x0, x1, y0, y1)``) and
    ``tensor_with_line_profile`` (``rect`` plus 1D profiles ``fx``, ``fy``
    on ``[-1, 1]``).
    """

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        kinds = ("scaled_bump", "funnel", "product", "tensor_with_line_profile")
        if self.kind not in kinds:
            raise ValueError(f"unknown trial kind {self.kind!r}")
        if self.kind == "funnel":
            s, eps = self.params["s"], self.params["eps"]
            if not 0.5 < s < 1.0:
                raise InadmissibleTrial("the funnel needs 1/2 < s < 1")
            if not 0.0 < eps < 0.1:
                raise InadmissibleTrial("the funnel needs 0 < eps < 1/10")


def funnel_parameters(s: float) -> tuple[float, int]:
    """``(eps, n)`` used for the funnel trial at order ``s``."""
    p = 2.0 * s - 1.0
    return 0.1 ** (1.0 / p), (math.floor(1.0 / p) + 1) ** 2


def funnel_trial(s: float) -> TrialDescriptor:
    eps, n = funnel_parameters(s)
    return TrialDescriptor("funnel", {"s": s, "eps": eps, "n": n})


def funnel_function(s: float, eps: float, n: int) -> Callable[[np.ndarray], np.ndarray]:
    """``1 - sum_{|j| <= n} zeta((x - j) / eps)``; it vanishes at every integer of ``[-n, n]``."""
    zeta = constants.zeta_profile(s).fn

    def phi(x):
        x = np.asarray(x, dtype=float)
        j = np.clip(np.round(x), -n, n)
        return 1.0 - zeta((x - j) / eps)

    return phi


@dataclass(frozen=True)
class FunnelBound:
    value: float
    bump_term: float
    funnel_term: float
    norm: float


def funnel_bound(s: float, eps: float, n: int, tol: float = 1e-8) -> FunnelBound:
    """Upper bound for the eigenvalue of the line with the integers removed.

    With ``u_n = u(./n)`` and the funnel ``phi``,
    ``[u_n phi] <= [u_n] + ||u||_inf [phi]``, ``[u_n]^2 = n^{1-2s} [u]^2``
    and ``[phi] <= sqrt(2n+1) eps^{1/2-s} [zeta]``.
    """
    u = bump()
    su = math.sqrt(n ** (1.0 - 2.0 * s) * gagliardo.seminorm_of_analytic(u, s, tol))
    sphi = math.sqrt((2 * n + 1) * eps ** (1.0 - 2.0 * s) * constants.zeta_seminorm(s).total)
    zeta = constants.zeta_profile(s).at
    # ||u_n phi||^2 = ||u_n||^2 - sum_j int u_n^2 (1 - (1 - zeta_j)^2)
    norm2 = n * gagliardo.l2_squared_analytic(u)
    for j in range(-n + 1, n):
        g = lambda x: u.at(x / n) ** 2 * (1.0 - (1.0 - zeta((x - j) / eps)) ** 2)
        norm2 -= gagliardo._quad(g, j - eps, j + eps, (j,), 1e-14, 1e-10)[0]
    value = ((su + sphi) / math.sqrt(norm2)) ** 2
    return FunnelBound(value, su, sphi, norm2)


def rayleigh_upper_bound(trial: TrialDescriptor, s: float, dom: RasterDomain | None = None,
                         tol: float = 1e-8) -> float:
    """Rayleigh-quotient upper bound for the first eigenvalue carried by ``trial``.

    ``product`` and ``tensor_with_line_profile`` use the splitting
    ``lambda(A x B) <= alpha_s (sqrt(q_x) + sqrt(q_y))^2`` of a tensor
    product into its 1D quotients.  ``funnel`` bounds the eigenvalue of
    the plane minus the horizontal lines through the integers, which
    lies below that of the comb domains.
    """
    s = gagliardo.check_order(s)
    P = trial.params
    if trial.kind == "scaled_bump":
        dim = P.get("dim", 2)
        if dom is not None:
            _check_disk(dom, P.get("center", (0.0, 0.0)), P["n"])
        return P["n"] ** (-2.0 * s) * dyda_quotient(s, dim)
    if trial.kind == "funnel":
        if abs(P["s"] - s) > 1e-15:
            raise InadmissibleTrial("funnel built for another order")
        return constants.alpha(s) * funnel_bound(s, P["eps"], P["n"], tol).value
    x0, x1, y0, y1 = P["rect"]
    if dom is not None:
        _check_rect(dom, P["rect"])
    if trial.kind == "product":
        q = profile_quotient(dyda_profile(s), s, tol)
        qx, qy = q, q
    else:
        qx, qy = profile_quotient(P["fx"], s, tol), profile_quotient(P["fy"], s, tol)
    ax, ay = 0.5 * (x1 - x0), 0.5 * (y1 - y0)
    return constants.alpha(s) * (math.sqrt(qx * ax ** (-2 * s)) + math.sqrt(qy * ay ** (-2 * s))) ** 2


def _inside_cells(dom: RasterDomain) -> np.ndarray:
    """Cells (lower-left node index) whose four corners are inside nodes."""
    m = dom.mask & ~dom.puncture_mask()
    return m[:-1, :-1] & m[1:, :-1] & m[:-1, 1:] & m[1:, 1:]


def _check_rect(dom: RasterDomain, rect) -> None:
    x0, x1, y0, y1 = rect
    ox, oy = dom.origin
    i0, i1 = math.floor((x0 - ox) / dom.h + 1e-9), math.ceil((x1 - ox) / dom.h - 1e-9)
    j0, j1 = math.floor((y0 - oy) / dom.h + 1e-9), math.ceil((y1 - oy) / dom.h - 1e-9)
    cells = _inside_cells(dom)
    if min(i0, j0) < 0 or i1 > dom.nx - 1 or j1 > dom.ny - 1 or not cells[j0:j1, i0:i1].all():
        raise InadmissibleTrial("rectangle is not covered by inside cells")


def _check_disk(dom: RasterDomain, center, radius: float) -> None:
    X, Y = dom.coordinates()
    Xc, Yc = X[:-1, :-1] + 0.5 * dom.h, Y[:-1, :-1] + 0.5 * dom.h
    # a cell meets the disk if its centre is within radius + half-diagonal
    hit = np.hypot(Xc - center[0], Yc - center[1]) < radius + dom.h / math.sqrt(2.0)
    if not _inside_cells(dom)[hit].all():
        raise InadmissibleTrial("disk is not covered by inside cells")


def best_trials(dom: RasterDomain) -> list[TrialDescriptor]:
    """Inscribed-rectangle product trial and inscribed-disk radial trial."""
    cells = _inside_cells(dom)
    out = []
    if cells.any():
        j0, i0, j1, i1 = largest_rectangle(cells)
        ox, oy = dom.origin
        h = dom.h
        out.append(TrialDescriptor("product", {"rect": (ox + i0 * h, ox + (i1 + 1) * h,
                                                         oy + j0 * h, oy + (j1 + 1) * h)}))
        d = distance_to_complement(dom)
        j, i = np.unravel_index(int(np.argmax(np.where(dom.mask, d, -1.0))), d.shape)
        radius = float(d[j, i]) - math.sqrt(2.0) * h
        if radius > 0:
            X, Y = dom.coordinates()
            out.append(TrialDescriptor("scaled_bump", {"n": radius, "dim": 2, "center": (X[j, i], Y[j, i])}))
    return out


def best_upper_bound(dom: RasterDomain, s: float, tol: float = 1e-8) -> tuple[float, TrialDescriptor]:
    trials = best_trials(dom)
    if not trials:
        raise InadmissibleTrial("no inside cell to carry a trial function")
    values = [rayleigh_upper_bound(t, s, dom, tol) for t in trials]
    k = int(np.argmin(values))
    return values[k], trials[k]


# --------------------------------------------------------------------------
# experiments
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class RemovalRow:
    h: float
    lam_full: float
    lam_removed: float
    gap: float


def point_removal_study(build: Callable[[float], RasterDomain], point, s: float,
                        hs: Sequence[float], tol: float = 1e-10) -> list[RemovalRow]:
    """Eigenvalue gap caused by deleting the node at ``point`` on a sequence of meshes."""
    rows = []
    for h in hs:
        dom = build(h)
        j, i = dom.node_index(point)
        if not dom.mask[j, i]:
            raise ValueError("point is not an inside node")
        form = gagliardo.assemble_2d(dom, s)
        full = smallest_eigenvalue(form, tol).lam
        mask = dom.mask.copy()
        mask[j, i] = False
        removed = smallest_eigenvalue(NonlocalForm(s, dom.h, mask, form.kernel), tol).lam
        rows.append(RemovalRow(h, full, removed, removed - full))
    return rows


@dataclass(frozen=True)
class BBMRow:
    s: float
    lam: float
    scaled: float
    target_half: float | None
    target_gradient: float | None


def richardson(coarse: float, fine: float, order: float = 1.0) -> float:
    """Extrapolate values at ``h`` and ``h/2`` with error ``~ h^order``."""
    r = 2.0**order
    return (r * fine - coarse) / (r - 1.0)


def bbm_sweep(build: Callable[[float], RasterDomain], h: float, s_list: Sequence[float],
              laplace_eigenvalue: float | None = None, extrapolate: bool = True) -> list[BBMRow]:
    """``(1 - s) lambda`` for each ``s``, optionally Richardson-extrapolated from ``2h`` and ``h``.

    Targets are ``lambda_1 / 2`` and the gradient limit ``(pi/2) lambda_1`` of the
    unnormalised planar seminorm.
    """
    rows = []
    fine_dom = build(h)
    coarse_dom = build(2.0 * h) if extrapolate else None
    for s in s_list:
        lam = eigenvalue(fine_dom, s).lam
        if extrapolate:
            lam = richardson(eigenvalue(coarse_dom, s).lam, lam)
        half = None if laplace_eigenvalue is None else 0.5 * laplace_eigenvalue
        grad = None if laplace_eigenvalue is None else 0.5 * math.pi * laplace_eigenvalue
        rows.append(BBMRow(s, lam, (1.0 - s) * lam, half, grad))
    return rows


@dataclass(frozen=True)
class KRow:
    k: int
    lam: float
    lam_shell: float
    scaled: float


def k_sweep(family: Callable[[int], tuple[RasterDomain, RasterDomain]], k_list: Sequence[int], s: float,
            tol: float = 1e-8) -> tuple[list[KRow], float]:
    """``k^s lambda(Omega_k)`` over ``k``; returns rows and the max/min spread.

    ``family(k)`` returns the domain and the comparison shell on one grid;
    punctures are removed nodes in both.
    """
    rows = []
    for k in k_list:
        dom, shell = family(k)
        lam = eigenvalue(dom, s, tol, remove_punctures=True).lam
        lam_shell = eigenvalue(shell, s, tol, remove_punctures=True).lam
        rows.append(KRow(k, lam, lam_shell, k**s * lam))
    vals = [r.scaled for r in rows]
    return rows, (max(vals) / min(vals) if vals else math.nan)
