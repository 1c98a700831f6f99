"""Explicit constants by quadrature, empirical envelopes for the inexplicit ones.

Every value carries a provenance tag (``closed-form``, ``quadrature``,
``estimated`` or ``configured``) so downstream certificates can say how
much of their output rests on corpus estimates.
"""
from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, NamedTuple, Sequence

import numpy as np
from scipy import integrate, special

from . import _kernels, gagliardo
from .gagliardo import GridFunction, NonConvergence, check_order
from .geometry import E1, E2, RasterDomain, raster_from_predicate

TAIL_CUT = 1.0e4
PROVENANCES = ("closed-form", "quadrature", "estimated", "configured")


def _quad(fn, a, b, **kw):
    kw.setdefault("limit", 500)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        return integrate.quad(fn, a, b, **kw)


# --------------------------------------------------------------------------
# explicit constants
# --------------------------------------------------------------------------

def fourier_A(s: float) -> float:
    """``(int_R |e^{it} - 1|^2 |t|^{-1-2s} dt)^{-1}`` by quadrature.

    On ``[0, 1]`` the weight ``t^{1-2s}`` is integrated exactly; on
    ``[1, inf)`` the non-oscillatory half is ``1/s`` and the cosine half is
    integrated with a Fourier-weighted rule up to ``TAIL_CUT`` followed by
    an asymptotic expansion.
    """
    s = check_order(s)
    a = 1.0 + 2.0 * s

    def sinc2(t):
        return 1.0 if t == 0.0 else (2.0 * math.sin(0.5 * t) / t) ** 2

    head, _ = _quad(sinc2, 0.0, 1.0, weight="alg", wvar=(1.0 - 2.0 * s, 0.0), epsabs=0, epsrel=1e-13)
    osc, _ = _quad(lambda t: t ** (-a), 1.0, TAIL_CUT, weight="cos", wvar=1.0, epsabs=0, epsrel=1e-13, limit=5000)
    T = TAIL_CUT
    tail = -math.sin(T) * T ** (-a) + a * math.cos(T) * T ** (-a - 1) + a * (a + 1) * math.sin(T) * T ** (-a - 2)
    half = head + 1.0 / s - 2.0 * (osc + tail)
    return 1.0 / (2.0 * half)


def fourier_A_closed(s: float) -> float:
    """Closed form ``Gamma(1+2s) sin(pi s) / (2 pi)`` (used as an oracle)."""
    return special.gamma(1.0 + 2.0 * s) * math.sin(math.pi * s) / (2.0 * math.pi)


def morrey_m(s: float) -> float:
    """Morrey constant ``(3-2s)(2s-1) / (2 * 4^(2-s) * A_s)``."""
    s = check_order(s, strict_half=True)
    return (3.0 - 2.0 * s) * (2.0 * s - 1.0) / (2.0 * 4.0 ** (2.0 - s) * fourier_A(s))


def alpha(s: float) -> float:
    """``int_R (1 + t^2)^{-(2+2s)/2} dt`` with a binomial tail beyond ``TAIL_CUT``."""
    s = float(s)
    if not 0.0 <= s <= 1.0:
        raise ValueError("alpha is defined for 0 <= s <= 1")
    e = 1.0 + s
    f = lambda t: (1.0 + t * t) ** (-e)
    edges = [0.0, 1.0, 10.0, 100.0, 1000.0, TAIL_CUT]
    body = sum(_quad(f, lo, hi, epsabs=0, epsrel=1e-13)[0] for lo, hi in zip(edges[:-1], edges[1:]))
    T = TAIL_CUT
    tail, coef = 0.0, 1.0
    for k in range(6):
        tail += coef * T ** (-1.0 - 2.0 * s - 2.0 * k) / (1.0 + 2.0 * s + 2.0 * k)
        coef *= -(e + k) / (k + 1)
    return 2.0 * (body + tail)


def alpha_closed(s: float) -> float:
    return math.sqrt(math.pi) * special.gamma(s + 0.5) / special.gamma(s + 1.0)


class ZetaSeminorm(NamedTuple):
    total: float
    I1: float
    I2: float
    I3: float


def zeta_profile(s: float) -> gagliardo.AnalyticFunction:
    """Funnel profile ``(1 - |x|^{2s-1})_+`` as an analytic function on ``[-1, 1]``."""
    p = 2.0 * s - 1.0
    fn = lambda x: np.where(np.abs(x) < 1.0, -np.expm1(p * np.log(np.maximum(np.abs(x), 1e-300))), 0.0)

    def scalar(x):
        x = abs(x)
        if x >= 1.0:
            return 0.0
        return 1.0 if x == 0.0 else -math.expm1(p * math.log(x))

    return gagliardo.AnalyticFunction(fn, (-1.0, 1.0), (0.0,), 1, scalar)


def zeta_seminorm(s: float, tol: float = 1e-8) -> ZetaSeminorm:
    """``[zeta_s]^2`` split into the square part and the two exterior parts.

    With ``p = 2s - 1``, homogeneity reduces the square part to
    ``4 (J1 + J2) / p`` where ``J1 = int_0^1 (1-t^p)^2 (1-t)^{-1-2s} dt`` and
    ``J2`` is the same with ``(1+t)``; each exterior part equals
    ``(1/s) int_{-1}^1 (1-|x|^p)^2 (1-x)^{-2s} dx``.
    """
    s = check_order(s, strict_half=True)
    p = 2.0 * s - 1.0
    om = lambda t: -math.expm1(p * math.log(t)) if t > 0 else 1.0   # 1 - t^p
    ratio2 = lambda t: (om(t) / (1.0 - t)) ** 2 if t < 1.0 else p * p

    opts = dict(epsabs=0.01 * p * tol, epsrel=1e-13)

    def from_zero(g, c):
        # int_0^c g(t) dt with v = t^p, which smooths out the cusp of t^p at 0
        jac = lambda v: g(v ** (1.0 / p)) * v ** (1.0 / p - 1.0) / p if v > 0 else 0.0
        return _quad(jac, 0.0, c**p, **opts)

    j1a, e1a = from_zero(lambda t: om(t) ** 2 * (1.0 - t) ** (-1.0 - 2.0 * s), 0.5)
    j1b, e1b = _quad(ratio2, 0.5, 1.0, weight="alg", wvar=(0.0, 1.0 - 2.0 * s), **opts)
    j2, e2 = from_zero(lambda t: om(t) ** 2 * (1.0 + t) ** (-1.0 - 2.0 * s), 1.0)
    I1 = 4.0 * (j1a + j1b + j2) / p

    k_neg, e3 = from_zero(lambda t: om(t) ** 2 * (1.0 + t) ** (-2.0 * s), 1.0)
    k_a, e4 = from_zero(lambda t: om(t) ** 2 * (1.0 - t) ** (-2.0 * s), 0.5)
    k_b, e5 = _quad(ratio2, 0.5, 1.0, weight="alg", wvar=(0.0, 2.0 - 2.0 * s), **opts)
    I2 = (k_neg + k_a + k_b) / s
    err = 4.0 * (e1a + e1b + e2) / p + 2.0 * (e3 + e4 + e5) / s
    if not all(map(math.isfinite, (I1, I2))) or err > tol:
        raise NonConvergence(f"funnel seminorm quadrature error {err:.2e} exceeds {tol:.2e}")
    return ZetaSeminorm(I1 + 2.0 * I2, I1, I2, I2)


# --------------------------------------------------------------------------
# corpus and empirical envelopes
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class CorpusFunction:
    """Smooth test function on the reference square ``(-1, 1)^2``."""

    name: str
    fn: Callable[[np.ndarray, np.ndarray], np.ndarray]

    def on(self, dom: RasterDomain, center=(0.0, 0.0), scale: float = 1.0) -> GridFunction:
        X, Y = dom.coordinates()
        return GridFunction(dom, self.fn((X - center[0]) / scale, (Y - center[1]) / scale))


def _bump(t):
    t = np.asarray(t, dtype=float)
    inside = np.abs(t) < 1.0
    out = np.zeros_like(t)
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - t[inside] ** 2))
    return out


def _tensor(cx, cy, ax, ay):
    return lambda X, Y: _bump((X - cx) / ax) * _bump((Y - cy) / ay)


def _oscillating(freq, phase=0.0):
    return lambda X, Y: _bump(X / 0.95) * _bump(Y / 0.95) * np.cos(np.pi * freq * X + phase)


def _funnel_point(rho):
    return lambda X, Y: _bump(X / 0.95) * _bump(Y / 0.95) * np.minimum(1.0, np.hypot(X, Y) / rho) ** 0.5


def _funnel_line(rho):
    return lambda X, Y: _bump(X / 0.95) * _bump(Y / 0.95) * np.minimum(1.0, np.abs(X) / rho) ** 0.5


def default_corpus() -> list[CorpusFunction]:
    """Twelve functions: tensor, off-centre, oscillating and funnel-type bumps."""
    return [
        CorpusFunction("tensor-wide", _tensor(0.0, 0.0, 0.9, 0.9)),
        CorpusFunction("tensor-mid", _tensor(0.0, 0.0, 0.6, 0.6)),
        CorpusFunction("tensor-narrow", _tensor(0.0, 0.0, 0.35, 0.35)),
        CorpusFunction("tensor-flat-x", _tensor(0.0, 0.0, 0.9, 0.4)),
        CorpusFunction("tensor-flat-y", _tensor(0.0, 0.0, 0.4, 0.9)),
        CorpusFunction("offcentre-a", _tensor(0.4, 0.2, 0.5, 0.5)),
        CorpusFunction("offcentre-b", _tensor(-0.5, -0.45, 0.4, 0.4)),
        CorpusFunction("oscillating-1", _oscillating(1.0)),
        CorpusFunction("oscillating-2", _oscillating(2.0)),
        CorpusFunction("oscillating-4", _oscillating(4.0)),
        CorpusFunction("funnel-point", _funnel_point(0.4)),
        CorpusFunction("funnel-line", _funnel_line(0.4)),
    ]


def extended_corpus() -> list[CorpusFunction]:
    """The default corpus plus twelve perturbed siblings (for stability studies)."""
    extra = [
        CorpusFunction("tensor-wide-2", _tensor(0.05, -0.05, 0.85, 0.85)),
        CorpusFunction("tensor-mid-2", _tensor(-0.1, 0.1, 0.55, 0.6)),
        CorpusFunction("tensor-narrow-2", _tensor(0.2, -0.2, 0.3, 0.35)),
        CorpusFunction("tensor-flat-x-2", _tensor(0.0, 0.3, 0.85, 0.4)),
        CorpusFunction("tensor-flat-y-2", _tensor(-0.3, 0.0, 0.4, 0.85)),
        CorpusFunction("offcentre-c", _tensor(0.45, -0.4, 0.45, 0.45)),
        CorpusFunction("offcentre-d", _tensor(-0.35, 0.5, 0.4, 0.35)),
        CorpusFunction("oscillating-1s", _oscillating(1.0, 0.5 * np.pi)),
        CorpusFunction("oscillating-3", _oscillating(3.0)),
        CorpusFunction("oscillating-3s", _oscillating(3.0, 0.5 * np.pi)),
        CorpusFunction("funnel-point-2", _funnel_point(0.25)),
        CorpusFunction("funnel-line-2", _funnel_line(0.25)),
    ]
    return default_corpus() + extra


@dataclass(frozen=True)
class Entry:
    """A constant together with where it came from."""

    value: float
    provenance: str
    corpus_size: int = 0
    note: str = ""

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        if not (self.value > 0 and math.isfinite(self.value)):
            raise ValueError("constants must be positive and finite")


def reference_square(h: float, half: float = 1.0) -> RasterDomain:
    return raster_from_predicate(lambda X, Y: (np.abs(X) < half) & (np.abs(Y) < half),
                                 (-half, -half, half, half), h, label="reference-square")


def directional_ratios(corpus: Sequence[CorpusFunction], s_grid: Iterable[float], h: float = 1 / 24):
    """Yield ``(name, s, direction, directional/full)`` for every corpus member."""
    dom = reference_square(h)
    for s in s_grid:
        form = gagliardo.assemble_2d(dom, s)
        for cf in corpus:
            u = cf.on(dom)
            full = form.evaluate(u)
            if full <= 0:
                continue
            for d in (E1, E2):
                yield cf.name, s, d, gagliardo.directional_seminorm(u, d, s) / full


def estimate_A_dir(corpus: Sequence[CorpusFunction], s_grid: Iterable[float] = (0.6, 0.75, 0.9),
                   h: float = 1 / 24, safety: float = 1.1) -> Entry:
    corpus = list(corpus)
    if not corpus:
        raise ValueError("empty corpus")
    best = max(r for *_, r in directional_ratios(corpus, s_grid, h))
    return Entry(safety * best, "estimated", len(corpus), f"max directional ratio {best:.6g}")


def disk_raster(radius: float, h: float) -> RasterDomain:
    return raster_from_predicate(lambda X, Y: X * X + Y * Y < radius * radius,
                                 (-radius, -radius, radius, radius), h, label="disk")


def poincare_ratios(corpus: Sequence[CorpusFunction], s_grid: Iterable[float], h: float = 1 / 24,
                    radius: float = 1.0):
    """Yield ``(name, s, ||u - avg||^2 / ((1-s) r^{2s} [u]^2_{B_r}))`` on a disk raster."""
    dom = disk_raster(radius, h)
    E = dom.mask
    for s in s_grid:
        w = gagliardo.assemble_2d(dom, s).stencil
        for cf in corpus:
            u = cf.on(dom, scale=radius).values
            num = float(np.sum((u[E] - u[E].mean()) ** 2) * h * h)
            den = (1.0 - s) * radius ** (2 * s) * gagliardo.regional_energy(u, E, w)
            if num <= 1e-14 * max(1.0, float(np.sum(u[E] ** 2) * h * h)) or den <= 0:
                continue
            yield cf.name, s, num / den


def estimate_M_pw(corpus: Sequence[CorpusFunction], s_grid: Iterable[float] = (0.6, 0.75, 0.9),
                  h: float = 1 / 24, radius: float = 1.0, safety: float = 1.1) -> Entry:
    corpus = list(corpus)
    if not corpus:
        raise ValueError("empty corpus")
    best = max(r for *_, r in poincare_ratios(corpus, s_grid, h, radius))
    return Entry(safety * best, "estimated", len(corpus), f"max Poincare ratio {best:.6g}")


def dirichlet_regions(dom: RasterDomain, r: float = 1.0) -> dict[str, np.ndarray]:
    """Compact node sets inside the closed square of half-side ``r`` used for the capacity Poincare study."""
    X, Y = dom.coordinates()
    h = dom.h
    tol = 0.5 * h
    inq = (np.abs(X) <= r + tol) & (np.abs(Y) <= r + tol)
    return {
        "vertical-line": inq & (np.abs(X) < tol),
        "horizontal-segment": inq & (np.abs(Y) < tol) & (np.abs(X) <= 0.5 * r + tol),
        "centre-block": (np.abs(X) <= 2 * h + tol) & (np.abs(Y) <= 2 * h + tol),
        "corner-L": inq & (((np.abs(X - 0.6 * r) < tol) & (Y >= 0.6 * r - tol)) |
                           ((np.abs(Y - 0.6 * r) < tol) & (X >= 0.6 * r - tol))),
    }


def capacity_poincare_ratios(corpus: Sequence[CorpusFunction], s_grid: Iterable[float], h: float = 1 / 12,
                             R_over_r: float = 2.0, gap: float = 0.25):
    """Yield ``(name, region, s, r^2 [u]^2_{Q_r} / (s cap(Sigma; B_R) ||u||^2_{Q_r}))`` with ``r = 1``.

    Corpus members are multiplied by a cut-off vanishing within ``2h`` of
    the Dirichlet region, so the support stays a positive distance away.
    """
    from . import capacity

    R = R_over_r
    dom = disk_raster(R, h)
    X, Y = dom.coordinates()
    Q = (np.abs(X) <= 1.0 + 0.5 * h) & (np.abs(Y) <= 1.0 + 0.5 * h)
    for region_name, sigma in dirichlet_regions(dom).items():
        dist = np.sqrt(_kernels.edt_squared(sigma)) * h
        cut = np.clip((dist - 2.0 * h) / gap, 0.0, 1.0) ** 2
        for s in s_grid:
            form = gagliardo.assemble_2d(dom, s)
            cap = capacity.capacity(sigma, dom.mask, form).value
            w = form.stencil
            for cf in corpus:
                u = cf.fn(X, Y) * cut * Q
                norm2 = float(np.sum(u[Q] ** 2) * h * h)
                if norm2 <= 1e-14:
                    continue
                lhs = gagliardo.regional_energy(u, Q, w)
                yield cf.name, region_name, s, lhs / (s * cap * norm2)


def estimate_phi22(corpus: Sequence[CorpusFunction], s_grid: Iterable[float] = (0.6, 0.75, 0.9),
                   h: float = 1 / 12, R_over_r: float = 2.0, safety: float = 1.1) -> Entry:
    corpus = list(corpus)
    if not corpus:
        raise ValueError("empty corpus")
    best = min(r for *_, r in capacity_poincare_ratios(corpus, s_grid, h, R_over_r))
    return Entry(best / safety, "estimated", len(corpus), f"min capacity-Poincare ratio {best:.6g}")


# --------------------------------------------------------------------------
# the lower-bound constant and the table
# --------------------------------------------------------------------------

def theta_formula(s: float, m_s: float, phi22: float, A_dir: float) -> float:
    """``(50(2-sqrt 2))^{(1-2s)/2} / 2^{1+2s} * m_s phi / (200 A)``."""
    return (50.0 * (2.0 - math.sqrt(2.0))) ** ((1.0 - 2.0 * s) / 2.0) / 2.0 ** (1.0 + 2.0 * s) \
        * m_s * phi22 / (200.0 * A_dir)


@dataclass
class ConstantsTable:
    """Per-order records plus the three global, possibly estimated, constants."""

    A_dir: Entry | None = None
    M_pw: Entry | None = None
    phi22: Entry | None = None
    records: dict = field(default_factory=dict)

    def record(self, s: float) -> dict:
        s = float(s)
        if s not in self.records:
            rec = {
                "A_s": Entry(fourier_A(s), "quadrature"),
                "alpha_s": Entry(alpha(s), "quadrature"),
            }
            if s > 0.5:
                rec["m_s"] = Entry(morrey_m(s), "quadrature")
                rec["zeta"] = Entry(zeta_seminorm(s).total, "quadrature")
            self.records[s] = rec
        return self.records[s]

    @property
    def heuristic(self) -> bool:
        return any(e is not None and e.provenance == "estimated" for e in (self.A_dir, self.M_pw, self.phi22))

    def theta(self, s: float) -> float:
        return theta(s, self)

    def snapshot(self, s: float) -> dict:
        """Flat, immutable view of every entry used for order ``s``."""
        out = {k: (e.value, e.provenance) for k, e in self.record(s).items()}
        for name in ("A_dir", "M_pw", "phi22"):
            e = getattr(self, name)
            if e is not None:
                out[name] = (e.value, e.provenance)
        return out

    def to_csv(self, s_values: Iterable[float]) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["s", "A_s", "m_s", "alpha_s", "zeta", "theta", "provenance"])
        for s in s_values:
            rec = self.record(s)
            th = self.theta(s) if (s > 0.5 and self.phi22 and self.A_dir) else float("nan")
            prov = ";".join(f"{k}:{v[1]}" for k, v in self.snapshot(s).items())
            m = rec["m_s"].value if "m_s" in rec else float("nan")
            z = rec["zeta"].value if "zeta" in rec else float("nan")
            wr.writerow([f"{s:g}", f"{rec['A_s'].value:.12g}", f"{m:.12g}", f"{rec['alpha_s'].value:.12g}",
                         f"{z:.12g}", f"{th:.12g}", prov])
        return buf.getvalue()


def theta(s: float, table: ConstantsTable) -> float:
    s = check_order(s, strict_half=True)
    missing = [n for n in ("phi22", "A_dir") if getattr(table, n) is None]
    if missing:
        raise KeyError(f"constants table lacks {', '.join(missing)}")
    return theta_formula(s, table.record(s)["m_s"].value, table.phi22.value, table.A_dir.value)


CONFIG_KEYS = ("A_dir", "M_pw", "phi22")


def parse_config(text: str) -> dict[str, float]:
    """``key=value`` lines; blank lines and ``#`` comments are ignored."""
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {n}: expected key=value")
        k, v = (x.strip() for x in line.split("=", 1))
        out[k] = float(v)
    return out


def load_table(config: str | Path | dict | None = None, estimate: bool = True,
               corpus: Sequence[CorpusFunction] | None = None) -> ConstantsTable:
    """Configured values win; anything missing is estimated from the corpus (or left empty)."""
    if isinstance(config, (str, Path)):
        config = parse_config(Path(config).read_text())
    config = dict(config or {})
    table = ConstantsTable()
    for k in CONFIG_KEYS:
        if k in config:
            setattr(table, k, Entry(config[k], "configured"))
    if estimate:
        corpus = list(corpus or default_corpus())
        if table.A_dir is None:
            table.A_dir = estimate_A_dir(corpus)
        if table.M_pw is None:
            table.M_pw = estimate_M_pw(corpus)
        if table.phi22 is None:
            table.phi22 = estimate_phi22(corpus)
    return table
