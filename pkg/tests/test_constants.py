import math

import numpy as np
import pytest
from scipy import integrate

from fracbound import constants as K
from fracbound import gagliardo as G
from fracbound.spectral import bump
from test_gagliardo import tent_exact


def band(values):
    return max(values) / min(values)


# ---------------------------------------------------------------- Fourier constant

def test_fourier_A_half():
    assert K.fourier_A(0.5) == pytest.approx(1 / (2 * math.pi), abs=1e-8)


@pytest.mark.parametrize("s", [0.05, 0.3, 0.6, 0.75, 0.9, 0.99])
def test_fourier_A_closed_form(s):
    assert K.fourier_A(s) == pytest.approx(K.fourier_A_closed(s), rel=1e-8)


def test_fourier_A_asymptotics():
    assert band([K.fourier_A(s) / (1 - s) for s in (0.9, 0.95, 0.99)]) < 1.5
    assert band([K.fourier_A(s) / s for s in (0.1, 0.05)]) < 1.5


def test_fourier_A_rejects_endpoints():
    for s in (0.0, 1.0):
        with pytest.raises(ValueError):
            K.fourier_A(s)


# ---------------------------------------------------------------- Morrey constant

def test_morrey_formula_at_three_quarters():
    # independent route: 1/A as an oscillatory integral with scipy's Fourier weight
    s = 0.75
    f = lambda t: 2 * t ** (-1 - 2 * s)
    inv = 2 * (integrate.quad(lambda t: 4 * math.sin(t / 2) ** 2 * t ** (-1 - 2 * s), 0, 50, limit=500)[0]
               + integrate.quad(f, 50, math.inf)[0]
               - integrate.quad(f, 50, math.inf, weight="cos", wvar=1.0)[0])
    expected = 1.5 * 0.5 / (2 * 4**1.25) * inv
    assert K.morrey_m(s) == pytest.approx(expected, rel=1e-7)


def test_morrey_asymptotics():
    assert band([K.morrey_m(s) / (2 * s - 1) for s in (0.51, 0.55, 0.6)]) < 3
    assert band([K.morrey_m(s) * (1 - s) for s in (0.9, 0.95, 0.99)]) < 3


def test_morrey_needs_strict_half():
    with pytest.raises(ValueError):
        K.morrey_m(0.5)


@pytest.mark.parametrize("s", [0.6, 0.75, 0.9])
def test_morrey_inequality_on_corpus(s):
    # m_s ||u||_inf^2 <= (b - a)^{2s-1} [u]^2 for functions supported in (a, b)
    m = K.morrey_m(s)
    assert m <= 2.0 ** (2 * s - 1) * tent_exact(s) * 1.01
    for t in (0.5, 1.0, 3.0):
        f = bump().rescaled(t)
        assert m <= (2 * t) ** (2 * s - 1) * G.seminorm_of_analytic(f, s, tol=1e-8) * 1.01


# ---------------------------------------------------------------- product constant

def test_alpha_values():
    assert K.alpha(0.5) == pytest.approx(2.0, abs=1e-10)
    assert K.alpha(1.0) == pytest.approx(math.pi / 2, abs=1e-10)


def test_alpha_decreasing_and_closed_form():
    grid = np.linspace(0, 1, 11)
    vals = [K.alpha(s) for s in grid]
    assert np.all(np.diff(vals) < 0)
    for s, v in zip(grid[1:], vals[1:]):
        assert v == pytest.approx(K.alpha_closed(s), rel=1e-10)


def test_alpha_domain():
    with pytest.raises(ValueError):
        K.alpha(1.2)


def test_deterministic():
    assert K.alpha(0.37) == K.alpha(0.37)
    assert K.morrey_m(0.77) == K.morrey_m(0.77)
    assert K.fourier_A(0.41) == K.fourier_A(0.41)


# ---------------------------------------------------------------- funnel seminorm

ZETA_GRID = [0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95]


def test_zeta_pieces_scale_like_ratio():
    rows = [K.zeta_seminorm(s) for s in ZETA_GRID]
    scale = [(2 * s - 1) / (1 - s) for s in ZETA_GRID]
    for piece in ("total", "I1", "I2", "I3"):
        vals = [getattr(r, piece) / c for r, c in zip(rows, scale)]
        assert all(math.isfinite(v) and v > 0 for v in vals)
        assert band(vals) < 10
    for r in rows:
        assert r.total == pytest.approx(r.I1 + r.I2 + r.I3, rel=1e-14)
        assert r.I2 == r.I3


@pytest.mark.parametrize("s", [0.6, 0.9])
def test_zeta_against_direct_quadrature(s):
    tol = 1e-8
    direct = G.seminorm_of_analytic(K.zeta_profile(s), s, tol=tol)
    assert abs(direct - K.zeta_seminorm(s, tol).total) <= 2 * tol * max(1.0, direct)


def test_zeta_strict_half():
    with pytest.raises(ValueError):
        K.zeta_seminorm(0.5)


# ---------------------------------------------------------------- estimates and table

@pytest.fixture(scope="module")
def corpus():
    return K.default_corpus()


def test_corpus_size(corpus):
    assert len(corpus) == 12 and len({c.name for c in corpus}) == 12


def test_A_dir_envelope(corpus):
    e = K.estimate_A_dir(corpus)
    assert e.provenance == "estimated" and e.corpus_size == 12
    # max construction: adding members can only increase the estimate
    assert K.estimate_A_dir(corpus[:4]).value <= e.value
    assert K.estimate_A_dir(K.extended_corpus()).value == pytest.approx(e.value, rel=0.05)
    # order of the s-grid is irrelevant
    assert K.estimate_A_dir(corpus, (0.9, 0.6, 0.75)).value == e.value


def test_M_pw_envelope(corpus):
    e = K.estimate_M_pw(corpus)
    assert K.estimate_M_pw(corpus[:5]).value <= e.value
    assert K.estimate_M_pw(corpus, h=1 / 32).value == pytest.approx(e.value, rel=0.10)


def test_phi22_envelope(corpus):
    e = K.estimate_phi22(corpus)
    assert K.estimate_phi22(corpus[:5]).value >= e.value
    # closer to the critical ratio the constant shrinks
    assert K.estimate_phi22(corpus, R_over_r=1.5).value < e.value


def test_empty_corpus():
    for est in (K.estimate_A_dir, K.estimate_M_pw, K.estimate_phi22):
        with pytest.raises(ValueError):
            est([])


def test_entry_validation():
    with pytest.raises(ValueError):
        K.Entry(-1.0, "configured")
    with pytest.raises(ValueError):
        K.Entry(1.0, "guessed")


def test_parse_config():
    cfg = K.parse_config("# comment\nA_dir = 1.5\n\nphi22=0.25  # trailing\n")
    assert cfg == {"A_dir": 1.5, "phi22": 0.25}
    with pytest.raises(ValueError):
        K.parse_config("A_dir 1.5")


def test_load_table_configured_wins(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("A_dir=2.0\nM_pw=1.0\nphi22=0.5\n")
    t = K.load_table(p)
    assert t.A_dir.provenance == "configured" and t.A_dir.value == 2.0
    assert not t.heuristic
    t2 = K.load_table({"A_dir": 2.0}, estimate=False)
    assert t2.phi22 is None
    with pytest.raises(KeyError):
        t2.theta(0.75)


def test_theta(configured_table):
    t = configured_table
    s = 0.75
    m = K.morrey_m(s)
    expected = (50 * (2 - math.sqrt(2))) ** ((1 - 2 * s) / 2) / 2 ** (1 + 2 * s) * m * 0.5 / (200 * 1.5)
    assert t.theta(s) == pytest.approx(expected, rel=1e-14)
    assert band([t.theta(s) / (2 * s - 1) for s in (0.51, 0.55, 0.6)]) < 3
    assert band([t.theta(s) * (1 - s) for s in (0.9, 0.95, 0.99)]) < 3
    doubled = K.load_table({"A_dir": 1.5, "M_pw": 1.0, "phi22": 1.0}, estimate=False)
    assert doubled.theta(s) == pytest.approx(2 * t.theta(s), rel=1e-14)


def test_table_csv(configured_table):
    text = configured_table.to_csv([0.6, 0.75])
    lines = text.strip().splitlines()
    assert lines[0] == "s,A_s,m_s,alpha_s,zeta,theta,provenance"
    assert len(lines) == 3 and "phi22:configured" in lines[1]


def test_estimated_table_is_heuristic(estimated_table):
    assert estimated_table.heuristic
    snap = estimated_table.snapshot(0.75)
    assert snap["A_dir"][1] == "estimated" and snap["alpha_s"][1] == "quadrature"
