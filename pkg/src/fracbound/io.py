"""Raster text format, CSV/JSON report emitters and a small SVG line plot.

Stencil dumps are binary: a fixed header (magic ``FRST``, version,
order, spacing, box shape) followed by one ``(dy, dx, weight)`` record per
displacement, for pinning kernels in regression tests.

Raster files start with ``frgeo v1 nx ny h ox oy``, followed by ``ny``
rows of ``0``/``1`` characters (top row first, so the file reads like a
picture) and then any number of ``punctures: x y`` lines.  An optional
``label: text`` line may follow the header.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import struct
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .geometry import RasterDomain

MAGIC = "frgeo"
VERSION = "v1"


class FormatError(ValueError):
    """Malformed raster text."""


def dumps_raster(dom: RasterDomain) -> str:
    lines = [f"{MAGIC} {VERSION} {dom.nx} {dom.ny} {dom.h!r} {dom.origin[0]!r} {dom.origin[1]!r}"]
    if dom.label:
        lines.append(f"label: {dom.label}")
    for row in dom.mask[::-1]:
        lines.append("".join("1" if b else "0" for b in row))
    lines.extend(f"punctures: {x!r} {y!r}" for x, y in dom.punctures)
    return "\n".join(lines) + "\n"


def loads_raster(text: str) -> RasterDomain:
    lines = [ln.rstrip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise FormatError("empty raster text")
    head = lines[0].split()
    if len(head) != 7 or head[0] != MAGIC:
        raise FormatError("header must read 'frgeo v1 nx ny h ox oy'")
    if head[1] != VERSION:
        raise FormatError(f"unsupported version {head[1]!r}")
    try:
        nx, ny = int(head[2]), int(head[3])
        h, ox, oy = (float(v) for v in head[4:])
    except ValueError as exc:
        raise FormatError(f"bad header value: {exc}") from None
    body = lines[1:]
    label = ""
    if body and body[0].startswith("label:"):
        label = body[0][6:].strip()
        body = body[1:]
    rows, punctures = body[:ny], body[ny:]
    if len(rows) != ny:
        raise FormatError(f"expected {ny} mask rows, found {len(rows)}")
    mask = np.zeros((ny, nx), dtype=bool)
    for n, row in enumerate(rows):
        if len(row) != nx or set(row) - {"0", "1"}:
            raise FormatError(f"mask row {n + 1} must hold {nx} characters 0/1")
        mask[ny - 1 - n] = np.frombuffer(row.encode(), dtype=np.uint8) == ord("1")
    pts = []
    for ln in punctures:
        if not ln.startswith("punctures:"):
            raise FormatError(f"unexpected line {ln!r}")
        vals = [float(v) for v in ln[10:].split()]
        if len(vals) % 2:
            raise FormatError("puncture coordinates come in pairs")
        pts.extend(zip(vals[::2], vals[1::2]))
    return RasterDomain((ox, oy), h, mask, tuple(pts), label)


def write_raster(dom: RasterDomain, path: str | Path) -> None:
    Path(path).write_text(dumps_raster(dom))


def read_raster(path: str | Path) -> RasterDomain:
    return loads_raster(Path(path).read_text())


STENCIL_MAGIC = b"FRST"
_STENCIL_HEAD = struct.Struct("<4sHddII")
_STENCIL_ROW = np.dtype([("dy", "<i4"), ("dx", "<i4"), ("w", "<f8")])


def dump_stencil(kernel: np.ndarray, s: float, h: float) -> bytes:
    """Serialise a 2D kernel array ``K[dy + ny - 1, dx + nx - 1]``."""
    kernel = np.asarray(kernel, dtype=float)
    ny, nx = (kernel.shape[0] + 1) // 2, (kernel.shape[1] + 1) // 2
    if kernel.shape != (2 * ny - 1, 2 * nx - 1):
        raise ValueError("kernel must have odd side lengths")
    dy, dx = np.indices(kernel.shape)
    rows = np.empty(kernel.size, dtype=_STENCIL_ROW)
    rows["dy"], rows["dx"], rows["w"] = (dy - ny + 1).ravel(), (dx - nx + 1).ravel(), kernel.ravel()
    return _STENCIL_HEAD.pack(STENCIL_MAGIC, 1, s, h, ny, nx) + rows.tobytes()


def load_stencil(data: bytes) -> tuple[np.ndarray, float, float]:
    """Inverse of :func:`dump_stencil`; returns ``(kernel, s, h)``."""
    if len(data) < _STENCIL_HEAD.size:
        raise FormatError("stencil dump too short")
    magic, version, s, h, ny, nx = _STENCIL_HEAD.unpack_from(data)
    if magic != STENCIL_MAGIC or version != 1:
        raise FormatError("not a version 1 stencil dump")
    shape = (2 * ny - 1, 2 * nx - 1)
    if len(data) != _STENCIL_HEAD.size + shape[0] * shape[1] * _STENCIL_ROW.itemsize:
        raise FormatError("stencil table does not match the header")
    rows = np.frombuffer(data, dtype=_STENCIL_ROW, offset=_STENCIL_HEAD.size)
    kernel = np.zeros(shape)
    kernel[rows["dy"] + ny - 1, rows["dx"] + nx - 1] = rows["w"]
    return kernel, s, h


# --------------------------------------------------------------------------
# reports
# --------------------------------------------------------------------------

def _plain(v):
    if dataclasses.is_dataclass(v) and not isinstance(v, type):
        return {f.name: _plain(getattr(v, f.name)) for f in dataclasses.fields(v)}
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v


def records(rows: Iterable) -> list[dict]:
    """Dataclass rows (or dicts) as flat dictionaries."""
    return [_plain(r) for r in rows]


def to_csv(rows: Sequence[dict]) -> str:
    rows = list(rows)
    if not rows:
        return ""
    fields = list(rows[0])
    for r in rows[1:]:
        fields += [k for k in r if k not in fields]
    buf = io.StringIO()
    wr = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    wr.writeheader()
    for r in rows:
        wr.writerow({k: ("" if r.get(k) is None else r.get(k)) for k in fields})
    return buf.getvalue()


def to_json(obj) -> str:
    return json.dumps(_plain(obj), indent=1)


def svg_plot(rows: Sequence[dict], x: str, ys: Sequence[str], title: str = "",
             width: int = 560, height: int = 360, log_y: bool = False) -> str:
    """Line-and-marker plot of columns ``ys`` against ``x``."""
    pts = [(float(r[x]), {y: r.get(y) for y in ys}) for r in rows]
    series = {y: [(px, float(v[y])) for px, v in pts if v[y] is not None and math.isfinite(float(v[y]))]
              for y in ys}
    allv = [v for s in series.values() for _, v in s]
    if not pts or not allv:
        raise ValueError("nothing to plot")
    tr = (lambda v: math.log10(v)) if log_y and min(allv) > 0 else (lambda v: v)
    xs = [p for p, _ in pts]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(map(tr, allv)), max(map(tr, allv))
    x1 = x1 if x1 > x0 else x0 + 1.0
    y1 = y1 if y1 > y0 else y0 + 1.0
    m = 50
    X = lambda v: m + (v - x0) / (x1 - x0) * (width - 2 * m)
    Y = lambda v: height - m - (tr(v) - y0) / (y1 - y0) * (height - 2 * m)
    colours = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"]
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">',
           '<rect width="100%" height="100%" fill="white"/>',
           f'<line x1="{m}" y1="{height - m}" x2="{width - m}" y2="{height - m}" stroke="black"/>',
           f'<line x1="{m}" y1="{m}" x2="{m}" y2="{height - m}" stroke="black"/>',
           f'<text x="{width / 2}" y="{height - 12}" text-anchor="middle">{x}</text>',
           f'<text x="{m}" y="{m - 20}">{title}</text>',
           f'<text x="{m - 4}" y="{height - m}" text-anchor="end">{y0:.3g}</text>',
           f'<text x="{m - 4}" y="{m + 4}" text-anchor="end">{y1:.3g}</text>']
    for n, (name, s) in enumerate(series.items()):
        c = colours[n % len(colours)]
        if len(s) > 1:
            path = " ".join(f"{X(a):.1f},{Y(b):.1f}" for a, b in s)
            out.append(f'<polyline points="{path}" fill="none" stroke="{c}"/>')
        out.extend(f'<circle cx="{X(a):.1f}" cy="{Y(b):.1f}" r="3" fill="{c}"/>' for a, b in s)
        out.append(f'<text x="{width - m + 4}" y="{m + 14 * n}" fill="{c}">{name}</text>')
    out.append("</svg>")
    return "\n".join(out)
