"""Planar raster domains, inradius, topological order, projections and convex bodies."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import _kernels


class EmptyDomainError(ValueError):
    """Raised when a raster has no inside node."""


# --------------------------------------------------------------------------
# raster domains
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RasterDomain:
    """Node grid ``x = ox + i h``, ``y = oy + j h`` with an inclusion mask.

    ``mask[j, i]`` is True when node ``(i, j)`` lies inside the open set.
    Punctures are removed points, snapped to inside nodes.  Their mask bit
    stays set, so the eigenvalue problem ignores them unless they are
    materialised with :meth:`with_punctures_removed`.
    """

    origin: tuple[float, float]
    h: float
    mask: np.ndarray
    punctures: tuple[tuple[float, float], ...] = ()
    label: str = ""

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=bool)
        object.__setattr__(self, "mask", mask)
        mask.setflags(write=False)
        if not self.h > 0:
            raise ValueError("node spacing h must be positive")
        if mask.ndim != 2 or min(mask.shape) < 3:
            raise ValueError("mask must be a 2D array with at least 3x3 nodes")
        if mask[0].any() or mask[-1].any() or mask[:, 0].any() or mask[:, -1].any():
            raise ValueError("the boundary ring of nodes must be outside the domain")
        snapped = []
        for p in self.punctures:
            j, i = self.node_index(p)
            if not (0 <= j < self.ny and 0 <= i < self.nx) or not mask[j, i]:
                raise ValueError(f"puncture {p} does not sit on an inside node")
            q = (float(self.origin[0] + i * self.h), float(self.origin[1] + j * self.h))
            if q not in snapped:
                snapped.append(q)
        object.__setattr__(self, "punctures", tuple(snapped))
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @property
    def ny(self) -> int:
        return self.mask.shape[0]

    @property
    def nx(self) -> int:
        return self.mask.shape[1]

    @property
    def n_inside(self) -> int:
        return int(self.mask.sum())

    def node_index(self, p: Sequence[float]) -> tuple[int, int]:
        i = int(round((p[0] - self.origin[0]) / self.h))
        j = int(round((p[1] - self.origin[1]) / self.h))
        return j, i

    def coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        """Meshgrid arrays ``X, Y`` of shape ``(ny, nx)``."""
        return np.meshgrid(_axis(self.origin[0], self.h, self.nx), _axis(self.origin[1], self.h, self.ny))

    def puncture_mask(self) -> np.ndarray:
        pm = np.zeros(self.mask.shape, dtype=bool)
        for p in self.punctures:
            pm[self.node_index(p)] = True
        return pm

    def bbox(self) -> tuple[float, float, float, float]:
        ox, oy = self.origin
        return ox, oy, ox + (self.nx - 1) * self.h, oy + (self.ny - 1) * self.h

    def with_punctures_removed(self) -> "RasterDomain":
        """Materialise punctures as removed nodes."""
        return RasterDomain(self.origin, self.h, self.mask & ~self.puncture_mask(), (), self.label)

    def with_mask(self, mask: np.ndarray, punctures: Iterable = None) -> "RasterDomain":
        pts = self.punctures if punctures is None else tuple(punctures)
        return RasterDomain(self.origin, self.h, mask, pts, self.label)

    def scaled(self, t: float) -> "RasterDomain":
        """Image under ``x -> t x`` (same nodes, spacing ``t h``)."""
        pts = tuple((t * x, t * y) for x, y in self.punctures)
        return RasterDomain((t * self.origin[0], t * self.origin[1]), t * self.h, self.mask, pts, self.label)

    def translated(self, dx: float, dy: float) -> "RasterDomain":
        pts = tuple((x + dx, y + dy) for x, y in self.punctures)
        return RasterDomain((self.origin[0] + dx, self.origin[1] + dy), self.h, self.mask, pts, self.label)

    def transposed(self) -> "RasterDomain":
        """Swap the two axes."""
        pts = tuple((y, x) for x, y in self.punctures)
        return RasterDomain((self.origin[1], self.origin[0]), self.h, self.mask.T.copy(), pts, self.label)

    def padded(self, width: int) -> "RasterDomain":
        """Enlarge the box by ``width`` outside nodes on every side."""
        m = np.pad(self.mask, width)
        o = (self.origin[0] - width * self.h, self.origin[1] - width * self.h)
        return RasterDomain(o, self.h, m, self.punctures, self.label)


def _axis(o: float, h: float, n: int) -> np.ndarray:
    # rounding keeps nodes that should sit on a boundary exactly on it
    return np.round(o + h * np.arange(n), 12)


def raster_from_predicate(inside, bbox: tuple[float, float, float, float], h: float,
                          punctures: Iterable = (), label: str = "", margin: int = 1) -> RasterDomain:
    """Sample ``inside(X, Y)`` on a grid covering ``bbox`` with ``margin`` outside rings."""
    x0, y0, x1, y1 = bbox
    nx = int(round((x1 - x0) / h)) + 1 + 2 * margin
    ny = int(round((y1 - y0) / h)) + 1 + 2 * margin
    ox, oy = x0 - margin * h, y0 - margin * h
    X, Y = np.meshgrid(_axis(ox, h, nx), _axis(oy, h, ny))
    mask = np.asarray(inside(X, Y), dtype=bool)
    mask[0] = mask[-1] = False
    mask[:, 0] = mask[:, -1] = False
    return RasterDomain((ox, oy), h, mask, tuple(punctures), label)


# --------------------------------------------------------------------------
# inradius and topology
# --------------------------------------------------------------------------

def distance_to_complement(dom: RasterDomain) -> np.ndarray:
    """Euclidean distance from every node to the nearest outside node or puncture."""
    obstacle = ~dom.mask | dom.puncture_mask()
    return np.sqrt(_kernels.edt_squared(obstacle)) * dom.h


def inradius(dom: RasterDomain) -> float:
    """Largest distance from an inside node to the complement (outside nodes and punctures)."""
    inner = dom.mask & ~dom.puncture_mask()
    if not inner.any():
        raise EmptyDomainError("domain has no inside node")
    return float(distance_to_complement(dom)[inner].max())


@dataclass(frozen=True)
class TopologyReport:
    k: int
    bounded_components: tuple[np.ndarray, ...]
    n_punctures: int
    has_unbounded: bool = True


def topology_order(dom: RasterDomain) -> TopologyReport:
    """Order of connectivity: bounded complement components + infinity + punctures.

    The complement is flood-filled with 8-connectivity; components touching
    the frame belong to the unbounded one.
    """
    lab = _kernels.label(~dom.mask, 8)
    frame = np.unique(np.concatenate([lab[0], lab[-1], lab[:, 0], lab[:, -1]]))
    comps = []
    for c in range(1, int(lab.max()) + 1):
        if c in frame:
            continue
        comps.append(np.argwhere(lab == c))
    k = len(comps) + 1 + len(dom.punctures)
    return TopologyReport(k=k, bounded_components=tuple(comps), n_punctures=len(dom.punctures))


# --------------------------------------------------------------------------
# projections
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Direction:
    omega: tuple[float, float]

    def __post_init__(self):
        w = np.asarray(self.omega, dtype=float)
        n = float(np.hypot(*w))
        if n == 0:
            raise ValueError("direction must be nonzero")
        if abs(n - 1.0) > 1e-12:
            w = w / n
        object.__setattr__(self, "omega", (float(w[0]), float(w[1])))

    @property
    def axis_aligned(self) -> bool:
        return self.omega[0] == 0.0 or self.omega[1] == 0.0


E1 = Direction((1.0, 0.0))
E2 = Direction((0.0, 1.0))


@dataclass(frozen=True)
class ProjectionResult:
    direction: Direction
    intervals: np.ndarray
    length: float
    exact: bool


def _merge(lo: np.ndarray, hi: np.ndarray, tol: float) -> np.ndarray:
    if lo.size == 0:
        return np.zeros((0, 2))
    order = np.lexsort((hi, lo))
    lo, hi = lo[order], hi[order]
    reach = np.maximum.accumulate(hi)
    start = np.concatenate([[True], lo[1:] > reach[:-1] + tol])
    first = np.flatnonzero(start)
    last = np.concatenate([first[1:] - 1, [lo.size - 1]])
    return np.column_stack([lo[first], reach[last]])


def project(points: np.ndarray, h: float, direction: Direction) -> ProjectionResult:
    """Measure of the projection of a node set along ``direction``.

    ``points`` is an ``(m, 2)`` array of node coordinates; each node is a
    footprint of width ``h``.  The image lives on the line orthogonal to
    ``direction`` and is parametrised by ``-w2 x + w1 y``.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    w1, w2 = direction.omega
    t = -w2 * pts[:, 0] + w1 * pts[:, 1]
    iv = _merge(t - h / 2, t + h / 2, 1e-9 * h)
    length = float((iv[:, 1] - iv[:, 0]).sum()) if iv.size else 0.0
    return ProjectionResult(direction, iv, length, direction.axis_aligned)


def node_points(dom_or_origin, h: float | None = None, nodes: np.ndarray | None = None) -> np.ndarray:
    """Coordinates of ``(j, i)`` node indices (``nodes``) on a raster."""
    if isinstance(dom_or_origin, RasterDomain):
        origin, h = dom_or_origin.origin, dom_or_origin.h
    else:
        origin = dom_or_origin
    nodes = np.asarray(nodes).reshape(-1, 2)
    return np.column_stack([origin[0] + h * nodes[:, 1], origin[1] + h * nodes[:, 0]])


# --------------------------------------------------------------------------
# convex bodies and the gauge map onto disks
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ConvexBody:
    """Convex polygon with counter-clockwise vertices and a base point inside."""

    vertices: np.ndarray
    x0: tuple[float, float]
    dK: float = field(init=False)
    DK: float = field(init=False)

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise ValueError("need at least three vertices")
        e = np.roll(v, -1, axis=0) - v
        cross = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
        if not np.all(cross > 0):
            raise ValueError("vertices must be strictly convex and counter-clockwise")
        x0 = np.asarray(self.x0, dtype=float)
        normals = np.column_stack([e[:, 1], -e[:, 0]]) / np.hypot(e[:, 0], e[:, 1])[:, None]
        offsets = np.einsum("ij,ij->i", normals, v - x0)
        if not np.all(offsets > 0):
            raise ValueError("base point must be strictly inside the polygon")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "x0", (float(x0[0]), float(x0[1])))
        object.__setattr__(self, "_normals", normals)
        object.__setattr__(self, "_offsets", offsets)
        object.__setattr__(self, "dK", float(offsets.min()))
        object.__setattr__(self, "DK", float(np.hypot(*(v - x0).T).max()))

    def scaled(self, t: float) -> "ConvexBody":
        x0 = np.asarray(self.x0)
        return ConvexBody(x0 + t * (self.vertices - x0), self.x0)


def regular_polygon(n: int, radius: float = 1.0, center=(0.0, 0.0)) -> ConvexBody:
    th = 2 * np.pi * np.arange(n) / n
    v = np.column_stack([center[0] + radius * np.cos(th), center[1] + radius * np.sin(th)])
    return ConvexBody(v, center)


def rectangle(width: float, height: float, center=(0.0, 0.0)) -> ConvexBody:
    cx, cy = center
    a, b = width / 2, height / 2
    v = [(cx - a, cy - b), (cx + a, cy - b), (cx + a, cy + b), (cx - a, cy + b)]
    return ConvexBody(np.asarray(v), center)


def triangle(p0, p1, p2, x0=None) -> ConvexBody:
    v = np.asarray([p0, p1, p2], dtype=float)
    if (v[1, 0] - v[0, 0]) * (v[2, 1] - v[0, 1]) - (v[1, 1] - v[0, 1]) * (v[2, 0] - v[0, 0]) < 0:
        v = v[::-1]
    base = v.mean(axis=0) if x0 is None else np.asarray(x0, dtype=float)
    return ConvexBody(v, (base[0], base[1]))


def minkowski_gauge(K: ConvexBody, x) -> np.ndarray:
    """Gauge of ``K`` about its base point, via the supporting half-planes.

    For a polygon ``{y : n_e . (y - x0) < c_e}`` the gauge is
    ``max_e n_e . (x - x0) / c_e``, which is what a ray cast from ``x0``
    through ``x`` returns.
    """
    x = np.asarray(x, dtype=float)
    d = x - np.asarray(K.x0)
    vals = np.tensordot(d, K._normals.T, axes=([-1], [0])) / K._offsets
    return np.maximum(vals.max(axis=-1), 0.0)


def phi_map(K: ConvexBody, x) -> np.ndarray:
    """Radial map sending ``t (K - x0) + x0`` onto the disk of radius ``t`` about ``x0``."""
    x = np.asarray(x, dtype=float)
    x0 = np.asarray(K.x0)
    d = x - x0
    r = np.linalg.norm(d, axis=-1)
    j = minkowski_gauge(K, x)
    safe = np.where(r > 0, r, 1.0)
    return x0 + d * (np.where(r > 0, j / safe, 0.0))[..., None]


def phi_inverse(K: ConvexBody, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    x0 = np.asarray(K.x0)
    d = y - x0
    r = np.linalg.norm(d, axis=-1)
    j = minkowski_gauge(K, y)
    safe = np.where(j > 0, j, 1.0)
    return x0 + d * (np.where(j > 0, r / safe, 0.0))[..., None]


def lipschitz_constants(K: ConvexBody) -> tuple[float, float]:
    """``(L, M)``: Lipschitz bounds of the gauge map and of its inverse."""
    return 2.0 / K.dK, K.DK * (2.0 + K.DK / K.dK)


# --------------------------------------------------------------------------
# raster utilities used by several modules
# --------------------------------------------------------------------------

def largest_rectangle(mask: np.ndarray) -> tuple[int, int, int, int]:
    """Largest all-True axis-aligned block ``(j0, i0, j1, i1)`` (inclusive), by area."""
    ny, nx = mask.shape
    heights = np.zeros(nx, dtype=int)
    best = (0, -1, -1, -1, -1)
    for j in range(ny):
        heights = np.where(mask[j], heights + 1, 0)
        stack: list[int] = []
        for i in range(nx + 1):
            hcur = heights[i] if i < nx else 0
            while stack and heights[stack[-1]] >= hcur:
                top = stack.pop()
                ht = heights[top]
                left = stack[-1] + 1 if stack else 0
                area = ht * (i - left)
                if ht > 0 and area > best[0]:
                    best = (area, j - ht + 1, left, j, i - 1)
            stack.append(i)
    if best[0] == 0:
        raise EmptyDomainError("mask is empty")
    return best[1], best[2], best[3], best[4]
