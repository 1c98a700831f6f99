"""Constructive fatness of the complement of a multiply connected raster domain.

A square of side ``10 delta r`` (``delta = floor(sqrt k) + 1``, ``r`` the
inradius) is split into ``4 delta^2`` cells of side ``5r``.  Every disk of
radius ``3r/2`` around a cell centre contains an outside point, the
witness.  A cell is reliable when the outside component of its witness,
clipped to the closed cell, reaches the cell boundary.  The union of the
reliable components has an axis projection of length at least
``sqrt(k) r / 4``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .geometry import E1, E2, ProjectionResult, RasterDomain, inradius, node_points, project, topology_order


class NoWitness(RuntimeError):
    """A witness disk holds no outside node: the radius is not the inradius."""

    def __init__(self, cell):
        super().__init__(f"no outside node in the witness disk of cell {cell}")
        self.cell = cell


def delta_of(k: int) -> int:
    if k < 1:
        raise ValueError("order must be at least 1")
    return math.isqrt(k) + 1


def lambda_k(k: int) -> int:
    """Guaranteed number of distinct unit projections."""
    if k < 1:
        raise ValueError("order must be at least 1")
    if k <= 3:
        return 1
    q = math.isqrt(k)
    return q // 2 if q % 2 == 0 else (q - 1) // 2


def tile_centers(k: int, r: float, tile_center=(0.0, 0.0)) -> np.ndarray:
    """Cell centres ``P[j, m]``, shape ``(2 delta, 2 delta, 2)``."""
    if r <= 0:
        raise ValueError("radius must be positive")
    d = delta_of(k)
    j = np.arange(2 * d)
    px = -5 * d + 2.5 + 5 * j
    py = 5 * d - 2.5 - 5 * j
    P = np.empty((2 * d, 2 * d, 2))
    P[..., 0] = tile_center[0] + r * px[:, None]
    P[..., 1] = tile_center[1] + r * py[None, :]
    return P


@dataclass(frozen=True, eq=False)
class FatnessCertificate:
    k: int
    r: float
    delta: int
    tile_center: tuple[float, float]
    dom: RasterDomain
    centers: np.ndarray
    witnesses: dict = field(default_factory=dict)
    reliable: tuple = ()
    continua: dict = field(default_factory=dict)
    sigma: np.ndarray | None = None
    proj_e1: ProjectionResult | None = None
    proj_e2: ProjectionResult | None = None
    trivial: bool = False

    @property
    def tile_half(self) -> float:
        return 5.0 * self.delta * self.r

    @property
    def bound(self) -> float:
        return math.sqrt(self.k) * self.r / 4.0

    @property
    def max_projection(self) -> float:
        return max(self.proj_e1.length, self.proj_e2.length)

    def holds(self) -> bool:
        return self.max_projection >= self.bound - 2.0 * self.dom.h

    def to_json(self) -> str:
        rows = []
        for j, row in enumerate(self.sigma):
            idx = np.flatnonzero(row)
            if idx.size:
                breaks = np.flatnonzero(np.diff(idx) > 1)
                starts = np.concatenate([[idx[0]], idx[breaks + 1]])
                ends = np.concatenate([idx[breaks], [idx[-1]]])
                rows.append([j, [[int(a), int(b)] for a, b in zip(starts, ends)]])
        data = {
            "k": self.k, "r": self.r, "delta": self.delta, "tile_center": list(self.tile_center),
            "tile_half": self.tile_half, "trivial": self.trivial,
            "grid": {"origin": list(self.dom.origin), "h": self.dom.h, "nx": self.dom.nx, "ny": self.dom.ny},
            "centers": self.centers.reshape(-1, 2).tolist(),
            "witnesses": {f"{j},{m}": list(map(float, p)) for (j, m), p in self.witnesses.items()},
            "reliable": [list(c) for c in self.reliable],
            "sigma_rows": rows,
            "projection_e1": {"length": self.proj_e1.length, "intervals": self.proj_e1.intervals.tolist()},
            "projection_e2": {"length": self.proj_e2.length, "intervals": self.proj_e2.intervals.tolist()},
            "bound": self.bound,
        }
        return json.dumps(data, indent=1)

    def to_svg(self, size: int = 600) -> str:
        c, half = self.tile_center, self.tile_half
        x0, y1 = c[0] - half * 1.05, c[1] + half * 1.05
        scale = size / (2.1 * half)
        X = lambda x: (x - x0) * scale
        Y = lambda y: (y1 - y) * scale
        h = self.dom.h * scale
        out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}">',
               '<rect width="100%" height="100%" fill="white"/>']
        Xn, Yn = self.dom.coordinates()
        inside = self.dom.mask & (np.abs(Xn - c[0]) <= half) & (np.abs(Yn - c[1]) <= half)
        for x, y in zip(Xn[inside], Yn[inside]):
            out.append(f'<rect x="{X(x) - h / 2:.2f}" y="{Y(y) - h / 2:.2f}" width="{h:.2f}" height="{h:.2f}" fill="#dde8f5"/>')
        for x, y in zip(Xn[self.sigma], Yn[self.sigma]):
            out.append(f'<rect x="{X(x) - h / 2:.2f}" y="{Y(y) - h / 2:.2f}" width="{h:.2f}" height="{h:.2f}" fill="#c0392b"/>')
        cell = 2.5 * self.r
        for j in range(self.centers.shape[0]):
            for m in range(self.centers.shape[1]):
                px, py = self.centers[j, m]
                colour = "#27ae60" if (j, m) in self.reliable else "#7f8c8d"
                out.append(f'<rect x="{X(px - cell):.2f}" y="{Y(py + cell):.2f}" width="{2 * cell * scale:.2f}" '
                           f'height="{2 * cell * scale:.2f}" fill="none" stroke="{colour}"/>')
                out.append(f'<circle cx="{X(px):.2f}" cy="{Y(py):.2f}" r="{1.5 * self.r * scale:.2f}" '
                           'fill="none" stroke="#95a5a6" stroke-dasharray="4 3"/>')
        for (j, m), (wx, wy) in self.witnesses.items():
            out.append(f'<circle cx="{X(wx):.2f}" cy="{Y(wy):.2f}" r="3" fill="black"/>')
        out.append(f'<rect x="{X(c[0] - half):.2f}" y="{Y(c[1] + half):.2f}" width="{2 * half * scale:.2f}" '
                   f'height="{2 * half * scale:.2f}" fill="none" stroke="black" stroke-width="2"/>')
        out.append("</svg>")
        return "\n".join(out)


def _covering(dom: RasterDomain, center, half: float) -> RasterDomain:
    """Pad ``dom`` with outside nodes until the closed square is inside the box."""
    x0, y0, x1, y1 = dom.bbox()
    need = max(x0 - (center[0] - half), y0 - (center[1] - half),
               (center[0] + half) - x1, (center[1] + half) - y1, 0.0)
    return dom.padded(int(math.ceil(need / dom.h)) + 1) if need > 0 else dom


def classify_cells(dom: RasterDomain, k: int, r: float, tile_center=(0.0, 0.0)):
    """Witnesses, reliable cells and their continua.

    Returns ``(witnesses, reliable, continua)``; ``witnesses`` maps
    ``(j, m)`` to a point, ``continua`` maps reliable cells to boolean
    node masks on ``dom``'s box.  ``dom`` must already cover the tile.
    """
    P = tile_centers(k, r, tile_center)
    outside = ~dom.mask | dom.puncture_mask()
    (ox, oy), h = dom.origin, dom.h
    eps = 1e-9 * h
    cell = 2.5 * r
    witnesses, reliable, continua = {}, [], {}
    for j in range(P.shape[0]):
        for m in range(P.shape[1]):
            px, py = P[j, m]
            # index window of the closed cell; all work happens inside it
            i0, i1 = math.ceil((px - cell - eps - ox) / h), math.floor((px + cell + eps - ox) / h)
            j0, j1 = math.ceil((py - cell - eps - oy) / h), math.floor((py + cell + eps - oy) / h)
            sl = (slice(j0, j1 + 1), slice(i0, i1 + 1))
            xs = ox + h * np.arange(i0, i1 + 1)
            ys = oy + h * np.arange(j0, j1 + 1)
            out = outside[sl]
            disk = (xs[None, :] - px) ** 2 + (ys[:, None] - py) ** 2 < (1.5 * r) ** 2
            cand = out & disk
            if not cand.any():
                raise NoWitness((j, m))
            # lexicographic order on (x, y): smallest column first, then smallest row
            col = int(np.flatnonzero(cand.any(axis=0))[0])
            row = int(np.flatnonzero(cand[:, col])[0])
            witnesses[(j, m)] = (float(xs[col]), float(ys[row]))
            lab = _kernels.label(out, 8)
            comp = lab == lab[row, col]
            # nodes on the outer ring of the clipped cell stand for the boundary
            ring = np.zeros_like(comp)
            ring[0, :] = ring[-1, :] = ring[:, 0] = ring[:, -1] = True
            if (comp & ring).any():
                reliable.append((j, m))
                full = np.zeros(dom.mask.shape, dtype=bool)
                full[sl] = comp
                continua[(j, m)] = full
    return witnesses, tuple(reliable), continua


def fatness_certificate(dom: RasterDomain, tile_center=(0.0, 0.0), k: int | None = None,
                        r: float | None = None) -> FatnessCertificate:
    """Certificate for the square of side ``10 delta r`` centred at ``tile_center``.

    ``k`` and ``r`` default to the measured order and inradius.
    """
    k = topology_order(dom).k if k is None else k
    r = inradius(dom) if r is None else r
    d = delta_of(k)
    half = 5.0 * d * r
    dom = _covering(dom, tile_center, half)
    X, Y = dom.coordinates()
    eps = 1e-9 * dom.h
    tile = (np.abs(X - tile_center[0]) <= half + eps) & (np.abs(Y - tile_center[1]) <= half + eps)
    P = tile_centers(k, r, tile_center)
    if not (dom.mask & tile).any():
        pts = node_points(dom, nodes=np.argwhere(tile))
        return FatnessCertificate(k, r, d, tuple(tile_center), dom, P, sigma=tile,
                                  proj_e1=project(pts, dom.h, E1), proj_e2=project(pts, dom.h, E2), trivial=True)
    witnesses, reliable, continua = classify_cells(dom, k, r, tile_center)
    sigma = np.zeros(dom.mask.shape, dtype=bool)
    for comp in continua.values():
        sigma |= comp
    pts = node_points(dom, nodes=np.argwhere(sigma))
    return FatnessCertificate(k, r, d, tuple(tile_center), dom, P, witnesses, reliable, continua, sigma,
                              project(pts, dom.h, E1), project(pts, dom.h, E2))
