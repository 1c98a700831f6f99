import math

import numpy as np
import pytest

from fracbound import constants as K, fatness as F, geometry as Gm, pipeline as P, spectral as S

H = 1 / 8


def test_shell_slug_sizes():
    assert P.shell_slug_sizes(25) == (4, 8)
    assert P.shell_slug_sizes(2) == (1, 0)
    for k in range(2, 60):
        n, m = P.shell_slug_sizes(k)
        assert n * n + m == k - 1 and 0 <= m <= 2 * n
    with pytest.raises(ValueError):
        P.shell_slug_sizes(1)


@pytest.mark.parametrize("k", [2, 3, 4, 5, 10, 17])
def test_family_order_and_inradius(k):
    dom = P.omega_k(k, H)
    assert Gm.topology_order(dom).k == k
    assert Gm.inradius(dom) <= math.sqrt(2) / 2 + 2 * H


def test_comb_window():
    dom = P.build_family(P.FamilySpec("comb_window", 1 / 4, {"k": 4}))
    assert len(dom.punctures) == 3
    assert Gm.topology_order(dom).k == 4


@pytest.mark.parametrize("spec", [("shell_slug", H, {"k": 1}), ("comb_window", H, {"k": 0}),
                                  ("disk", 0.0, {}), ("disk", H, {"radius": -1.0}),
                                  ("annulus", H, {"outer": 0.5, "inner": 0.5}), ("blob", H, {})])
def test_family_validation(spec):
    with pytest.raises(ValueError):
        P.build_family(P.FamilySpec(*spec))


def test_shell_slug_grid_requirements():
    with pytest.raises(ValueError):
        P.build_family(P.FamilySpec("shell_slug", 1 / 3, {"k": 4}))
    with pytest.raises(ValueError):
        P.build_family(P.FamilySpec("shell_slug", 0.3, {"k": 4}))


def test_random_perforated_is_seeded():
    a = P.build_family(P.FamilySpec("random_perforated", H, {"seed": 4, "count": 6}))
    b = P.build_family(P.FamilySpec("random_perforated", H, {"seed": 4, "count": 6}))
    assert np.array_equal(a.mask, b.mask)
    assert Gm.topology_order(a).k == 7


def test_tiles_meeting_shared_edges():
    # a node on the line x = 5 delta belongs to both neighbouring tiles
    dom = Gm.raster_from_predicate(lambda X, Y: (np.abs(X - 5) < 0.1) & (np.abs(Y) < 0.1), (4, -1, 6, 1), 0.05)
    assert P.tiles_meeting(dom, 1) == [(0, 0), (1, 0)]


# ---------------------------------------------------------------- certificate

def test_closed_form_is_theta_for_unit_inradius(configured_table):
    dom = Gm.raster_from_predicate(lambda X, Y: X**2 + Y**2 < 1, (-1, -1, 1, 1), H)
    r = Gm.inradius(dom)
    cert = P.lower_bound_certificate(dom.scaled(1 / r), 0.75, configured_table)
    assert cert.k == 1
    assert cert.bound_closed_form == pytest.approx(K.theta(0.75, configured_table))


@pytest.mark.parametrize("k", [1, 4, 9])
@pytest.mark.parametrize("s", [0.6, 0.9])
def test_pipeline_bound_dominates_tile_formula(k, s, configured_table):
    dom = P.omega_k(k, H)
    cert = P.lower_bound_certificate(dom, s, configured_table)
    r, d, t = cert.r_omega, cert.delta, configured_table
    m_s = t.record(s)["m_s"].value
    pref = t.phi22.value / 50 * (50 * (2 - math.sqrt(2))) ** ((1 - 2 * s) / 2) * m_s / t.A_dir.value
    floor = pref * d ** (-1 - 2 * s) * (math.sqrt(k) / 4 - 2 * H / r) * r ** (-2 * s)
    assert cert.bound_pipeline >= floor * (1 - 1e-12)
    assert all(rec.max_projection >= math.sqrt(k) / 4 - 2 * H / r for rec in cert.tiles)


def test_disk_bound_positive(configured_table):
    cert = P.lower_bound_certificate(P.build_family(P.FamilySpec("disk", 1 / 16)), 0.75, configured_table)
    assert cert.lower > 0 and not cert.heuristic
    assert cert.constants_used


def test_scale_covariance(configured_table):
    dom = P.omega_k(4, H)
    a = P.lower_bound_certificate(dom, 0.75, configured_table).lower
    b = P.lower_bound_certificate(dom.scaled(3.0), 0.75, configured_table).lower
    assert b == pytest.approx(3.0 ** -1.5 * a, rel=1e-12)


def test_certificate_validation(configured_table):
    dom = P.omega_k(2, H)
    with pytest.raises(ValueError):
        P.lower_bound_certificate(dom, 0.5, configured_table)
    with pytest.raises(ValueError):
        P.lower_bound_certificate(dom, 0.75, configured_table, path="numeric")
    bare = K.load_table({"A_dir": 1.0}, estimate=False)
    with pytest.raises(KeyError):
        P.lower_bound_certificate(dom, 0.75, bare)


@pytest.mark.slow
def test_qp_path_runs(configured_table):
    cert = P.lower_bound_certificate(P.omega_k(2, 1 / 4), 0.75, configured_table, path="qp", qp_nodes=16)
    assert cert.bound_pipeline > 0 and cert.path == "qp"


# ---------------------------------------------------------------- verification

def test_verify_pass_and_fail(configured_table):
    dom = P.omega_k(4, H)
    rep = P.verify_main_theorem(dom, 0.75, configured_table)
    assert rep.verdict == "PASS"
    assert rep.lower_pipeline <= rep.eig <= rep.upper
    assert P.verify_main_theorem(dom, 0.75, P.inflated(configured_table, 1e6)).verdict == "FAIL"


def test_verify_square(configured_table):
    rep = P.verify_main_theorem(P.build_family(P.FamilySpec("square", 1 / 16)), 0.9, configured_table)
    assert rep.verdict == "PASS"


def test_inflated_leaves_original():
    t = K.load_table({"A_dir": 1.5, "M_pw": 1.0, "phi22": 0.5}, estimate=False)
    u = P.inflated(t, 10.0)
    assert t.phi22.value == 0.5 and u.phi22.value == 5.0


# ---------------------------------------------------------------- order near one half

def test_s_half_sweep_rows():
    rows, spread = P.s_half_sweep(4, [0.55, 0.65])
    assert [r.n for r in rows] == [S.funnel_parameters(s)[1] for s in (0.55, 0.65)]
    assert all(r.ratio == pytest.approx(r.upper / (2 * r.s - 1)) for r in rows)
    assert spread >= 1


def test_s_half_sweep_validation():
    with pytest.raises(ValueError):
        P.s_half_sweep(4, [0.8])
    rows, spread = P.s_half_sweep(4, [])
    assert rows == [] and math.isnan(spread)


def test_s_half_sweep_with_eigenvalue():
    with pytest.warns(UserWarning):
        rows, _ = P.s_half_sweep(2, [0.7], h=1 / 2, eig=True, width=2.0)
    assert rows[0].eig is not None and rows[0].eig <= rows[0].upper
