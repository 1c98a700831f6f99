"""Hot loops with a numba path and a numpy path.

The distance transform and the labelling agree bit for bit between the
two paths; the pair energy agrees up to summation order.  The
dispatchers at the bottom pick a path according to :mod:`fracbound._jit`.
"""
from __future__ import annotations

import numpy as np

from ._jit import njit, use_numba

BIG = 1.0e18


# --------------------------------------------------------------------------
# exact squared Euclidean distance transform (lower envelope of parabolas)
# --------------------------------------------------------------------------

@njit
def _envelope_1d_nb(f, out, v, z):
    n = f.shape[0]
    k = 0
    v[0] = 0
    z[0] = -BIG
    z[1] = BIG
    for q in range(1, n):
        while True:
            p = v[k]
            sq = ((f[q] + q * q) - (f[p] + p * p)) / (2.0 * q - 2.0 * p)
            if sq <= z[k] and k > 0:
                k -= 1
            else:
                break
        p = v[k]
        sq = ((f[q] + q * q) - (f[p] + p * p)) / (2.0 * q - 2.0 * p)
        if sq <= z[k]:
            # k == 0 and the new parabola dominates everywhere
            v[0] = q
            z[0] = -BIG
            z[1] = BIG
        else:
            k += 1
            v[k] = q
            z[k] = sq
            z[k + 1] = BIG
    k = 0
    for q in range(n):
        while z[k + 1] < q:
            k += 1
        p = v[k]
        out[q] = (q - p) * (q - p) + f[p]


@njit
def _edt_sq_nb(obstacle):
    ny, nx = obstacle.shape
    g = np.empty((ny, nx))
    n = max(nx, ny)
    v = np.empty(n, dtype=np.int64)
    z = np.empty(n + 1)
    col = np.empty(ny)
    tmp = np.empty(ny)
    for i in range(nx):
        for j in range(ny):
            col[j] = 0.0 if obstacle[j, i] else BIG
        _envelope_1d_nb(col, tmp, v, z)
        for j in range(ny):
            g[j, i] = min(tmp[j], BIG)
    out = np.empty((ny, nx))
    row = np.empty(nx)
    tmp2 = np.empty(nx)
    for j in range(ny):
        for i in range(nx):
            row[i] = g[j, i]
        _envelope_1d_nb(row, tmp2, v, z)
        for i in range(nx):
            out[j, i] = min(tmp2[i], BIG)
    return out


def _envelope_axis_np(f: np.ndarray, axis: int) -> np.ndarray:
    """Brute-force min_q f[q] + (i-q)^2 along ``axis`` (chunked over q)."""
    f = np.moveaxis(f, axis, -1)
    n = f.shape[-1]
    idx = np.arange(n, dtype=float)
    out = np.full(f.shape, BIG)
    chunk = max(1, 2_000_000 // max(1, f.size))
    for q0 in range(0, n, chunk):
        q = idx[q0:q0 + chunk]
        cand = f[..., q0:q0 + chunk, None] + (idx[None, :] - q[:, None]) ** 2
        out = np.minimum(out, cand.min(axis=-2))
    return np.moveaxis(np.minimum(out, BIG), -1, axis)


def _edt_sq_np(obstacle: np.ndarray) -> np.ndarray:
    f = np.where(obstacle, 0.0, BIG)
    g = _envelope_axis_np(f, 0)
    return _envelope_axis_np(g, 1)


# --------------------------------------------------------------------------
# connected-component labelling
# --------------------------------------------------------------------------

@njit
def _label_nb(fg, eight):
    ny, nx = fg.shape
    lab = np.zeros((ny, nx), dtype=np.int64)
    stack = np.empty(ny * nx, dtype=np.int64)
    cur = 0
    for j0 in range(ny):
        for i0 in range(nx):
            if not fg[j0, i0] or lab[j0, i0] != 0:
                continue
            cur += 1
            lab[j0, i0] = cur
            top = 0
            stack[0] = j0 * nx + i0
            top = 1
            while top > 0:
                top -= 1
                c = stack[top]
                j = c // nx
                i = c - j * nx
                for dj in range(-1, 2):
                    for di in range(-1, 2):
                        if dj == 0 and di == 0:
                            continue
                        if not eight and dj != 0 and di != 0:
                            continue
                        jj = j + dj
                        ii = i + di
                        if jj < 0 or jj >= ny or ii < 0 or ii >= nx:
                            continue
                        if fg[jj, ii] and lab[jj, ii] == 0:
                            lab[jj, ii] = cur
                            stack[top] = jj * nx + ii
                            top += 1
    return lab


def _shift(a: np.ndarray, dj: int, di: int, fill) -> np.ndarray:
    out = np.full_like(a, fill)
    ny, nx = a.shape
    ys = slice(max(dj, 0), ny + min(dj, 0))
    yd = slice(max(-dj, 0), ny + min(-dj, 0))
    xs = slice(max(di, 0), nx + min(di, 0))
    xd = slice(max(-di, 0), nx + min(-di, 0))
    out[yd, xd] = a[ys, xs]
    return out


def _label_np(fg: np.ndarray, eight: bool) -> np.ndarray:
    ny, nx = fg.shape
    n = ny * nx
    sentinel = n
    rep = np.where(fg, np.arange(n).reshape(ny, nx), sentinel).astype(np.int64)
    offsets = [(dj, di) for dj in (-1, 0, 1) for di in (-1, 0, 1)
               if (dj, di) != (0, 0) and (eight or dj == 0 or di == 0)]
    while True:
        new = rep.copy()
        for dj, di in offsets:
            nb = _shift(rep, dj, di, sentinel)
            new = np.where(fg, np.minimum(new, nb), sentinel)
        flat = np.append(new.ravel(), sentinel)
        # hook representatives onto the smaller label, then pointer-jump
        np.minimum.at(flat, rep.ravel()[fg.ravel()], new.ravel()[fg.ravel()])
        while True:
            jumped = flat[flat]
            if np.array_equal(jumped, flat):
                break
            flat = jumped
        new = flat[:-1].reshape(ny, nx)
        new = np.where(fg, new, sentinel)
        if np.array_equal(new, rep):
            break
        rep = new
    out = np.zeros((ny, nx), dtype=np.int64)
    roots = np.unique(rep[fg])
    out[fg] = np.searchsorted(roots, rep[fg]) + 1
    return out


# --------------------------------------------------------------------------
# pairwise interaction energy sum_{i<j in E} w(i-j) (u_i - u_j)^2
# --------------------------------------------------------------------------

@njit
def _pair_energy_nb(u, member, w, cy, cx):
    ny, nx = u.shape
    wy, wx = w.shape
    total = 0.0
    for j in range(ny):
        for i in range(nx):
            if not member[j, i]:
                continue
            ui = u[j, i]
            acc = 0.0
            for dj in range(0, min(cy, ny - 1 - j) + 1):
                lo = -cx if dj > 0 else 1
                for di in range(lo, cx + 1):
                    ii = i + di
                    if ii < 0 or ii >= nx:
                        continue
                    jj = j + dj
                    if not member[jj, ii]:
                        continue
                    d = ui - u[jj, ii]
                    acc += w[cy + dj, cx + di] * d * d
            total += acc
    return total


def _pair_energy_np(u, member, w, cy, cx):
    ny, nx = u.shape
    rows = np.zeros(ny)
    for dj in range(0, min(cy, ny - 1) + 1):
        lo = -cx if dj > 0 else 1
        for di in range(max(lo, -(nx - 1)), min(cx, nx - 1) + 1):
            wt = w[cy + dj, cx + di]
            a = u[: ny - dj, max(0, -di): nx - max(0, di)]
            b = u[dj:, max(0, di): nx + min(0, di)]
            ma = member[: ny - dj, max(0, -di): nx - max(0, di)]
            mb = member[dj:, max(0, di): nx + min(0, di)]
            term = np.where(ma & mb, (a - b) ** 2, 0.0)
            rows[: ny - dj] += wt * term.sum(axis=1)
    return float(rows.sum())


# --------------------------------------------------------------------------
# dispatchers
# --------------------------------------------------------------------------

def edt_squared(obstacle: np.ndarray) -> np.ndarray:
    """Squared Euclidean distance (in node units) to the nearest ``True`` node."""
    obstacle = np.ascontiguousarray(obstacle, dtype=np.bool_)
    if use_numba():
        return _edt_sq_nb(obstacle)
    return _edt_sq_np(obstacle)


def label(fg: np.ndarray, connectivity: int = 8) -> np.ndarray:
    """Label connected components; labels ordered by first node in row-major order."""
    if connectivity not in (4, 8):
        raise ValueError("connectivity must be 4 or 8")
    fg = np.ascontiguousarray(fg, dtype=np.bool_)
    if use_numba():
        return _label_nb(fg, connectivity == 8)
    return _label_np(fg, connectivity == 8)


def pair_energy(u: np.ndarray, member: np.ndarray, w: np.ndarray) -> float:
    """Sum of ``w(d) (u_i - u_j)^2`` over unordered member pairs within the stencil window.

    ``w`` has odd shape ``(2*cy+1, 2*cx+1)`` and is indexed by displacement.
    """
    u = np.ascontiguousarray(u, dtype=float)
    member = np.ascontiguousarray(member, dtype=np.bool_)
    w = np.ascontiguousarray(w, dtype=float)
    cy, cx = (w.shape[0] - 1) // 2, (w.shape[1] - 1) // 2
    if use_numba():
        return float(_pair_energy_nb(u, member, w, cy, cx))
    return _pair_energy_np(u, member, w, cy, cx)
