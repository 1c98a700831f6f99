"""Domain families, the tiled lower-bound certificate and the main-inequality check."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import capacity, constants, fatness, gagliardo, spectral
from .geometry import RasterDomain, inradius, raster_from_predicate, topology_order


# --------------------------------------------------------------------------
# domain families
# --------------------------------------------------------------------------

def shell_slug_sizes(k: int) -> tuple[int, int]:
    """``(n_k, m_k)``: side of the punctured square and length of the strip."""
    if k < 2:
        raise ValueError("the shell-slug family starts at k = 2")
    n = math.isqrt(k - 1)
    return n, (k - 1) - n * n


@dataclass(frozen=True)
class FamilySpec:
    """Parameters of a test domain.

    ``kind`` is one of ``shell_slug`` (``k``), ``comb_window`` (``k``,
    ``width``, ``height``), ``disk`` (``radius``), ``square`` (``side``),
    ``annulus`` (``outer``, ``inner``) and ``random_perforated`` (``seed``,
    ``count``, ``side``).  ``h`` is the grid spacing.
    """

    kind: str
    h: float
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.h <= 0:
            raise ValueError("grid spacing must be positive")
        if self.kind == "shell_slug" and self.params.get("k", 0) < 2:
            raise ValueError("shell_slug needs k >= 2")
        if self.kind == "comb_window" and self.params.get("k", 0) < 1:
            raise ValueError("comb_window needs k >= 1")
        for k, v in self.params.items():
            if isinstance(v, (int, float)) and k != "seed" and v <= 0:
                raise ValueError(f"parameter {k} must be positive")


def _unit_fraction(h: float, what: str) -> int:
    q = round(1.0 / h)
    if abs(q * h - 1.0) > 1e-12:
        raise ValueError(f"{what} needs h = 1/q for an integer q")
    return q


def build_family(spec: FamilySpec) -> RasterDomain:
    P, h = spec.params, spec.h
    if spec.kind == "shell_slug":
        k = P["k"]
        n, m = shell_slug_sizes(k)
        q = _unit_fraction(h, "shell_slug")
        if q % 2:
            raise ValueError("shell_slug needs an even 1/h so that cell centres are nodes")

        def inside(X, Y):
            shell = (X > 0) & (X < n) & (Y > 0) & (Y < n)
            slug = (X > 0) & (X < m) & (Y > -1) & (Y < 0)
            seam = (Y == 0) & (X > 0) & (X < min(n, m))
            return shell | slug | seam

        punct = [(i + 0.5, j + 0.5) for j in range(n) for i in range(n)] + [(i + 0.5, -0.5) for i in range(m)]
        return raster_from_predicate(inside, (0.0, -1.0 if m else 0.0, float(max(n, m)), float(n)), h,
                                     punct, f"shell_slug k={k}")
    if spec.kind == "comb_window":
        k = P["k"]
        W = float(P.get("width", 8.0))
        H = int(P.get("height", 2))
        _unit_fraction(h, "comb_window")
        if W <= 1:
            raise ValueError("window too small to hold the gaps")
        y0, y1 = -H, k + H

        def inside(X, Y):
            box = (np.abs(X) < W) & (Y > y0) & (Y < y1)
            teeth = (np.abs(Y - np.round(Y)) < 1e-9) & (np.abs(X) >= 1.0)
            return box & ~teeth

        punct = [(0.0, float(i)) for i in range(1, k)]
        return raster_from_predicate(inside, (-W, y0, W, y1), h, punct, f"comb_window k={k}")
    if spec.kind == "disk":
        R = P.get("radius", 0.5)
        return raster_from_predicate(lambda X, Y: X**2 + Y**2 < R * R, (-R, -R, R, R), h, (), "disk")
    if spec.kind == "square":
        L = P.get("side", 1.0)
        return raster_from_predicate(lambda X, Y: (X > 0) & (X < L) & (Y > 0) & (Y < L), (0, 0, L, L), h, (), "square")
    if spec.kind == "annulus":
        R, r = P.get("outer", 1.0), P.get("inner", 0.5)
        if r >= R:
            raise ValueError("inner radius must be below the outer one")
        return raster_from_predicate(lambda X, Y: (X**2 + Y**2 < R * R) & (X**2 + Y**2 > r * r),
                                     (-R, -R, R, R), h, (), "annulus")
    if spec.kind == "random_perforated":
        return _random_perforated(P.get("seed", 0), P.get("count", 5), P.get("side", 4.0), h)
    raise ValueError(f"unknown family {spec.kind!r}")


def _random_perforated(seed: int, count: int, side: float, h: float) -> RasterDomain:
    """Square with ``count`` square holes of 1 to 3 nodes, pairwise separated."""
    rng = np.random.default_rng(seed)
    dom = build_family(FamilySpec("square", h, {"side": side}))
    mask = dom.mask.copy()
    placed = []
    tries = 0
    while len(placed) < count:
        tries += 1
        if tries > 1000 * (count + 1):
            raise ValueError("could not place the requested holes")
        w = int(rng.integers(1, 4))
        j, i = (int(v) for v in rng.integers(3, np.array(mask.shape) - 3 - w))
        box = (j - 2, i - 2, j + w + 2, i + w + 2)
        if not dom.mask[box[0]:box[2], box[1]:box[3]].all():
            continue
        if any(not (box[2] <= b[0] or b[2] <= box[0] or box[3] <= b[1] or b[3] <= box[1]) for b in placed):
            continue
        mask[j:j + w, i:i + w] = False
        placed.append(box)
    return dom.with_mask(mask)


def shell_of(k: int, h: float) -> RasterDomain:
    """Punctured square of side ``n_k`` on the grid of the shell-slug domain."""
    n, m = shell_slug_sizes(k)
    full = build_family(FamilySpec("shell_slug", h, {"k": k}))
    X, Y = full.coordinates()
    mask = full.mask & (X > 0) & (X < n) & (Y > 0) & (Y < n)
    punct = [p for p in full.punctures if p[1] > 0]
    return RasterDomain(full.origin, full.h, mask, tuple(punct), f"shell k={k}")


def omega_k(k: int, h: float) -> RasterDomain:
    """Shell-slug domain of order ``k``; the unit square for ``k = 1``."""
    if k == 1:
        return build_family(FamilySpec("square", h))
    return build_family(FamilySpec("shell_slug", h, {"k": k}))


# --------------------------------------------------------------------------
# lower-bound certificate
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TileRecord:
    index: tuple[int, int]
    center: tuple[float, float]
    trivial: bool
    reliable: int
    max_projection: float
    capacity: float
    bound: float


@dataclass(frozen=True)
class LowerBoundCertificate:
    s: float
    k: int
    r_omega: float
    delta: int
    path: str
    tiles: tuple
    constants_used: dict
    bound_pipeline: float
    bound_closed_form: float
    heuristic: bool

    @property
    def lower(self) -> float:
        return max(self.bound_pipeline, self.bound_closed_form)


def tiles_meeting(dom: RasterDomain, delta: int) -> list[tuple[int, int]]:
    """Indices ``(i, j)`` of the squares ``Q_{5 delta}(10 delta (i, j))`` that meet the domain.

    Inside nodes are interior points, so a node on a shared edge meets
    every tile containing that edge.
    """
    X, Y = dom.coordinates()
    inside = dom.mask & ~dom.puncture_mask()
    side = 10.0 * delta
    tiny = 1e-9
    found = set()
    for x, y in zip(X[inside] / side + 0.5, Y[inside] / side + 0.5):
        for i in {math.floor(x - tiny), math.floor(x + tiny)}:
            for j in {math.floor(y - tiny), math.floor(y + tiny)}:
                found.add((i, j))
    return sorted(found)


def lower_bound_certificate(dom: RasterDomain, s: float, table: constants.ConstantsTable,
                            path: str = "analytic", R_over_r: float = 2.0, qp_nodes: int = 48) -> LowerBoundCertificate:
    """Tile, certify fatness on every tile meeting the domain, and bound capacities.

    ``path="analytic"`` uses the projection bound for the capacity,
    ``path="qp"`` solves the discrete capacity problem on a grid with
    about ``qp_nodes`` nodes per tile side.
    """
    s = gagliardo.check_order(s, strict_half=True)
    if path not in ("analytic", "qp"):
        raise ValueError("path is 'analytic' or 'qp'")
    if table.phi22 is None or table.A_dir is None:
        raise KeyError("constants table lacks phi22 or A_dir")
    r = inradius(dom)
    k = topology_order(dom).k
    unit = dom.scaled(1.0 / r)
    d = fatness.delta_of(k)
    rec = table.record(s)
    m_s, phi, A = rec["m_s"].value, table.phi22.value, table.A_dir.value
    dist_factor = (50.0 * (2.0 - math.sqrt(2.0))) ** ((1.0 - 2.0 * s) / 2.0) * d ** (1.0 - 2.0 * s)
    tiles = []
    for i, j in tiles_meeting(unit, d):
        c = (10.0 * d * i, 10.0 * d * j)
        cert = fatness.fatness_certificate(unit, c, k=k, r=1.0)
        if path == "analytic":
            cap = dist_factor * m_s / A * cert.max_projection
        else:
            cap = _qp_capacity(cert, s, 5.0 * d * R_over_r, qp_nodes)
        tiles.append(TileRecord((i, j), c, cert.trivial, len(cert.reliable), cert.max_projection, cap,
                                phi / (50.0 * d * d) * cap))
    bound_unit = min(t.bound for t in tiles)
    scale = r ** (-2.0 * s)
    closed = constants.theta(s, table) * k ** (-s) * scale
    return LowerBoundCertificate(s, k, r, d, path, tuple(tiles), table.snapshot(s), bound_unit * scale,
                                 closed, table.heuristic)


def _qp_capacity(cert: fatness.FatnessCertificate, s: float, radius: float, qp_nodes: int) -> float:
    """Discrete capacity of the certificate's set relative to the disk, on a coarsened grid."""
    half = cert.tile_half
    H = max(cert.dom.h, 2.0 * half / qp_nodes)
    n = int(math.ceil(radius / H)) + 2
    ax = np.arange(-n, n + 1) * H
    X, Y = np.meshgrid(cert.tile_center[0] + ax, cert.tile_center[1] + ax)
    B = (X - cert.tile_center[0]) ** 2 + (Y - cert.tile_center[1]) ** 2 < radius * radius
    Xs, Ys = cert.dom.coordinates()
    pts = np.column_stack([Xs[cert.sigma], Ys[cert.sigma]])
    sigma = np.zeros_like(B)
    jj = np.clip(np.round((pts[:, 1] - Y[0, 0]) / H).astype(int), 0, B.shape[0] - 1)
    ii = np.clip(np.round((pts[:, 0] - X[0, 0]) / H).astype(int), 0, B.shape[1] - 1)
    sigma[jj, ii] = True
    sigma &= B
    form = gagliardo.NonlocalForm(s, H, B, gagliardo.kernel_2d(s, B.shape, H))
    return capacity.capacity(sigma, B, form).value


# --------------------------------------------------------------------------
# main inequality
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class VerifyReport:
    s: float
    lower_pipeline: float
    lower_closed_form: float
    eig: float
    upper: float
    upper_trial: str
    heuristic: bool
    tol: float

    @property
    def verdict(self) -> str:
        lower = max(self.lower_pipeline, self.lower_closed_form)
        ok = lower <= self.eig + self.tol and self.eig <= self.upper + self.tol
        return "PASS" if ok else "FAIL"


def verify_main_theorem(dom: RasterDomain, s: float, table: constants.ConstantsTable, tol: float = 1e-6,
                        path: str = "analytic") -> VerifyReport:
    """Lower certificate, discrete eigenvalue and trial upper bound; PASS iff ``lower <= eig <= upper``."""
    cert = lower_bound_certificate(dom, s, table, path)
    eig = spectral.eigenvalue(dom, s).lam
    upper, trial = spectral.best_upper_bound(dom, s)
    return VerifyReport(s, cert.bound_pipeline, cert.bound_closed_form, eig, upper, trial.kind, cert.heuristic, tol)


def inflated(table: constants.ConstantsTable, factor: float) -> constants.ConstantsTable:
    """Copy of ``table`` with ``phi22`` multiplied by ``factor``."""
    e = table.phi22
    return replace(table, phi22=constants.Entry(e.value * factor, e.provenance, e.corpus_size, "inflated"),
                   records=dict(table.records))


# --------------------------------------------------------------------------
# order close to one half
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class HalfRow:
    s: float
    eps: float
    n: int
    upper: float
    ratio: float
    eig: float | None


def s_half_sweep(k: int, s_list, h: float = 0.25, eig: bool = False, width: float | None = None,
                 tol: float = 1e-8) -> tuple[list[HalfRow], float]:
    """Funnel upper bounds for the comb, divided by ``2s - 1``; returns rows and the max/min spread.

    With ``eig`` the discrete eigenvalue of the comb window is added; the
    window half-width grows to the funnel's ``n`` when needed.
    """
    rows = []
    for s in s_list:
        if not 0.5 < s < 0.75:
            raise ValueError("orders must lie in (1/2, 3/4)")
        trial = spectral.funnel_trial(s)
        up = spectral.rayleigh_upper_bound(trial, s, tol=tol)
        lam = None
        if eig:
            W = max(8.0, float(trial.params["n"])) if width is None else width
            if width is not None and width < trial.params["n"]:
                warnings.warn(f"window half-width grown from {width} to {trial.params['n']}")
                W = float(trial.params["n"])
            dom = build_family(FamilySpec("comb_window", h, {"k": k, "width": W}))
            lam = spectral.eigenvalue(dom, s, remove_punctures=True).lam
        rows.append(HalfRow(s, trial.params["eps"], trial.params["n"], up, up / (2 * s - 1), lam))
    vals = [r.ratio for r in rows]
    return rows, (max(vals) / min(vals) if vals else math.nan)
