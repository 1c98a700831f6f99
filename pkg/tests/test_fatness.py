import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fracbound import fatness as F, geometry as Gm, pipeline
from fracbound.geometry import E1, E2, node_points, project, raster_from_predicate


H = 1 / 8


@pytest.fixture(scope="module")
def strip():
    return raster_from_predicate(lambda X, Y: (Y > 0) & (Y < 2) & (np.abs(X) < 40), (-40, 0, 40, 2), H, (), "strip")


@pytest.fixture(scope="module")
def lattice():
    pts = [(i + 0.5, j + 0.5) for i in range(-12, 12) for j in range(-12, 12)]
    return raster_from_predicate(lambda X, Y: (np.abs(X) < 12) & (np.abs(Y) < 12), (-12, -12, 12, 12), H, pts, "lattice")


def test_tile_centers():
    assert F.tile_centers(3, 1.0).reshape(-1, 2).shape == (16, 2)
    assert F.tile_centers(4, 1.0).shape == (6, 6, 2)
    assert tuple(F.tile_centers(1, 1.0)[0, 0]) == (-7.5, 7.5)
    P = F.tile_centers(2, 2.0, (1.0, -1.0))
    assert np.allclose(P.reshape(-1, 2).mean(axis=0), (1.0, -1.0))
    with pytest.raises(ValueError):
        F.tile_centers(2, 0.0)


@given(st.integers(1, 400))
def test_cells_tile_the_square(k):
    d = F.delta_of(k)
    P = F.tile_centers(k, 1.0)
    assert P.shape == (2 * d, 2 * d, 2)
    # cells of side 5 abut and fill the square of side 10 delta
    assert P[..., 0].min() - 2.5 == pytest.approx(-5 * d)
    assert P[..., 1].max() + 2.5 == pytest.approx(5 * d)
    assert np.allclose(np.diff(P[:, 0, 0]), 5.0)


@pytest.mark.parametrize("k,expected", [(1, 1), (2, 1), (3, 1), (4, 1), (8, 1), (9, 1), (15, 1),
                                        (16, 2), (24, 2), (25, 2), (36, 3), (49, 3), (64, 4)])
def test_lambda_table(k, expected):
    assert F.lambda_k(k) == expected


def test_order_validation():
    for fn in (F.lambda_k, F.delta_of):
        with pytest.raises(ValueError):
            fn(0)


def test_isolated_points_are_unreliable(lattice):
    cert = F.fatness_certificate(lattice, (0, 0), k=4, r=0.8)
    assert len(cert.witnesses) == 36
    assert cert.reliable == ()
    assert cert.max_projection == 0.0
    assert not cert.holds()


def test_strip_cells_are_reliable(strip):
    assert Gm.inradius(strip) == pytest.approx(1.0)
    cert = F.fatness_certificate(strip, (0, 0), k=1, r=1.0)
    assert len(cert.reliable) == 16
    assert cert.holds()


def test_trivial_tile(strip):
    cert = F.fatness_certificate(strip, (500, 500), k=1, r=1.0)
    assert cert.trivial and cert.holds()
    assert cert.max_projection >= 2 * cert.tile_half - 2 * strip.h


def test_bound_value():
    cert = F.fatness_certificate(pipeline.omega_k(4, H).scaled(2.0), (0, 0), k=4, r=1.0)
    assert cert.bound == 0.5


@pytest.mark.parametrize("k", [1, 2, 3, 4, 9, 16])
def test_certificate_on_family(k):
    dom = pipeline.omega_k(k, H)
    r = Gm.inradius(dom)
    cert = F.fatness_certificate(dom.scaled(1 / r), (0, 0), k=k, r=1.0)
    assert cert.holds()
    assert len(cert.reliable) >= 3 * cert.delta**2


def test_each_continuum_reaches_across(strip):
    # a reliable continuum meets the cell boundary, so it spans at least r - 2h in some axis
    cert = F.fatness_certificate(pipeline.omega_k(9, H).scaled(2.0), (0, 0), k=9, r=1.0)
    for comp in cert.continua.values():
        pts = node_points(cert.dom, nodes=np.argwhere(comp))
        span = max(project(pts, cert.dom.h, E1).length, project(pts, cert.dom.h, E2).length)
        assert span >= cert.r - 2 * cert.dom.h


def test_deterministic():
    dom = pipeline.omega_k(5, H)
    a = F.fatness_certificate(dom, (0.3, 0.2))
    b = F.fatness_certificate(dom, (0.3, 0.2))
    assert a.witnesses == b.witnesses and a.reliable == b.reliable
    assert np.array_equal(a.sigma, b.sigma)


def test_witness_is_lexicographically_first(strip):
    cert = F.fatness_certificate(strip, (0, 0), k=1, r=1.0)
    X, Y = cert.dom.coordinates()
    outside = ~cert.dom.mask
    for (j, m), (wx, wy) in cert.witnesses.items():
        px, py = cert.centers[j, m]
        cand = outside & ((X - px) ** 2 + (Y - py) ** 2 < 2.25)
        best = min(zip(X[cand], Y[cand]))
        assert (wx, wy) == pytest.approx(best)


def test_reports(strip):
    cert = F.fatness_certificate(strip, (0, 0), k=1, r=1.0)
    data = json.loads(cert.to_json())
    assert data["delta"] == 2 and len(data["centers"]) == 16
    assert data["projection_e1"]["length"] == pytest.approx(cert.proj_e1.length)
    svg = cert.to_svg()
    assert svg.startswith("<svg") and svg.endswith("</svg>")


def test_no_witness_when_radius_too_small_for_the_domain():
    # the claimed radius is far below the true inradius, so interior cells find no outside node
    big = pipeline.build_family(pipeline.FamilySpec("square", 1 / 4, {"side": 30.0}))
    with pytest.raises(F.NoWitness) as err:
        F.fatness_certificate(big, (15, 15), k=1, r=1.0)
    assert isinstance(err.value.cell, tuple)
