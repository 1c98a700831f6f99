import math

import numpy as np
import pytest

from fracbound import constants as K
from fracbound import gagliardo as G
from fracbound import pipeline, spectral as S
from fracbound.gagliardo import AnalyticFunction
from conftest import disk, square


def unit_square(h):
    return pipeline.build_family(pipeline.FamilySpec("square", h))


@pytest.fixture(scope="module")
def sq16():
    return unit_square(1 / 16)


# ---------------------------------------------------------------- solver

def test_scaling_covariance(sq16):
    s, t = 0.75, 2.5
    a = S.eigenvalue(sq16, s).lam
    b = S.eigenvalue(sq16.scaled(t), s).lam
    assert b == pytest.approx(t ** (-2 * s) * a, rel=1e-8)


def test_nested_masks(sq16, rng):
    s = 0.7
    big = S.eigenvalue(sq16, s).lam
    for _ in range(3):
        mask = sq16.mask & (rng.random(sq16.mask.shape) > 0.1)
        assert S.eigenvalue(sq16.with_mask(mask), s).lam >= big - 1e-12 * big


def test_dense_and_iterative_agree(sq16):
    form = G.assemble_2d(sq16, 0.8)
    a = S.smallest_eigenvalue(form)
    b = S.smallest_eigenvalue(form, dense_limit=0)
    assert b.method == "inverse-iteration" and a.method == "dense"
    assert b.lam == pytest.approx(a.lam, rel=1e-9)
    assert np.allclose(a.vector, b.vector, atol=1e-6 * np.abs(a.vector).max())


def test_ground_state_properties(sq16):
    form = G.assemble_2d(sq16, 0.65)
    res = S.smallest_eigenvalue(form)
    v = res.vector[sq16.mask]
    assert v.min() >= -1e-8 * v.max()
    assert res.rayleigh(form) == pytest.approx(res.lam, rel=1e-8)
    assert res.residual <= 1e-8
    again = S.smallest_eigenvalue(form)
    assert again.lam == res.lam


def test_no_active_nodes(sq16):
    with pytest.raises(S.NoActiveNodes):
        S.eigenvalue(sq16.with_mask(np.zeros_like(sq16.mask)), 0.7)


def test_refinement_decreases_eigenvalue():
    # nested Q1 spaces: the discrete eigenvalue cannot increase under h -> h/2
    vals = [S.eigenvalue(unit_square(h), 0.75).lam for h in (1 / 8, 1 / 16, 1 / 32)]
    assert vals[0] >= vals[1] >= vals[2]


# ---------------------------------------------------------------- radial and product trials

@pytest.mark.parametrize("s", [0.3, 0.6, 0.75, 0.9])
def test_dyda_closed_form_matches_quadrature(s):
    assert S.dyda_quotient(s, 1) == pytest.approx(S.profile_quotient(S.dyda_profile(s), s), rel=1e-8)


def test_quotient_invariant_under_constant_factor():
    s = 0.75
    f = S.dyda_profile(s)
    g = AnalyticFunction(lambda x: 3.0 * f.fn(x), f.support, f.singular, 1, lambda x: 3.0 * f.scalar(x))
    assert S.profile_quotient(g, s) == pytest.approx(S.profile_quotient(f, s), rel=1e-8)


def test_scaled_bump_scaling():
    s = 0.7
    one = S.rayleigh_upper_bound(S.TrialDescriptor("scaled_bump", {"n": 1.0}), s)
    three = S.rayleigh_upper_bound(S.TrialDescriptor("scaled_bump", {"n": 3.0}), s)
    assert three == pytest.approx(3 ** (-2 * s) * one, rel=1e-14)


def test_product_bound_tends_to_strip_bound():
    s = 0.75
    q = S.profile_quotient(S.dyda_profile(s), s)
    strip = K.alpha(s) * q
    vals = [S.rayleigh_upper_bound(S.TrialDescriptor("product", {"rect": (-1, 1, -L, L)}), s) for L in (1, 10, 1000)]
    assert vals[0] > vals[1] > vals[2] > strip
    assert vals[2] == pytest.approx(strip, rel=0.05)


def test_tensor_profiles_reduce_to_product():
    s = 0.75
    f = S.dyda_profile(s)
    a = S.rayleigh_upper_bound(S.TrialDescriptor("product", {"rect": (0, 2, 0, 1)}), s)
    b = S.rayleigh_upper_bound(S.TrialDescriptor("tensor_with_line_profile", {"rect": (0, 2, 0, 1), "fx": f, "fy": f}), s)
    assert a == pytest.approx(b, rel=1e-12)


def test_inadmissible_trials(sq16):
    with pytest.raises(S.InadmissibleTrial):
        S.rayleigh_upper_bound(S.TrialDescriptor("product", {"rect": (0.5, 1.5, 0, 1)}), 0.75, sq16)
    with pytest.raises(S.InadmissibleTrial):
        S.rayleigh_upper_bound(S.TrialDescriptor("scaled_bump", {"n": 0.6, "center": (0.5, 0.5)}), 0.75, sq16)
    with pytest.raises(ValueError):
        S.TrialDescriptor("gaussian")


@pytest.mark.parametrize("build", [lambda: unit_square(1 / 24), lambda: disk(1 / 16),
                                   lambda: pipeline.build_family(pipeline.FamilySpec("annulus", 1 / 16, {"outer": 1.0, "inner": 0.3})),
                                   lambda: pipeline.omega_k(4, 1 / 8)])
@pytest.mark.parametrize("s", [0.6, 0.9])
def test_upper_bound_consistency(build, s):
    dom = build()
    up, trial = S.best_upper_bound(dom, s)
    assert up >= S.eigenvalue(dom, s).lam - 1e-6


# ---------------------------------------------------------------- funnel

def test_funnel_parameters():
    eps, n = S.funnel_parameters(0.75)
    assert eps == pytest.approx(0.01) and n == 9
    eps, n = S.funnel_parameters(0.6)
    assert eps == pytest.approx(1e-5) and n == 36


def test_funnel_validation():
    with pytest.raises(S.InadmissibleTrial):
        S.TrialDescriptor("funnel", {"s": 0.5, "eps": 0.01, "n": 4})
    with pytest.raises(S.InadmissibleTrial):
        S.TrialDescriptor("funnel", {"s": 0.7, "eps": 0.1, "n": 4})
    with pytest.raises(S.InadmissibleTrial):
        S.rayleigh_upper_bound(S.funnel_trial(0.7), 0.65)


def test_funnel_vanishes_at_integers():
    s = 0.6
    eps, n = S.funnel_parameters(s)
    phi = S.funnel_function(s, eps, n)
    ints = np.arange(-n, n + 1, dtype=float)
    assert np.all(phi(ints) == 0)
    assert np.all(phi(ints + 0.5) == 1)


def test_funnel_bound_terms():
    fb = S.funnel_bound(0.7, *S.funnel_parameters(0.7))
    assert fb.value == pytest.approx(((fb.bump_term + fb.funnel_term) / math.sqrt(fb.norm)) ** 2)
    assert fb.norm < S.funnel_parameters(0.7)[1] * G.l2_squared_analytic(S.bump())


# ---------------------------------------------------------------- experiments

def test_point_removal_trend():
    rows = S.point_removal_study(unit_square, (0.5, 0.5), 0.75, [1 / 8, 1 / 16])
    assert rows[0].gap > 0
    assert rows[1].gap < rows[0].gap


def test_removing_nothing_changes_nothing(sq16):
    form = G.assemble_2d(sq16, 0.75)
    same = G.NonlocalForm(0.75, sq16.h, sq16.mask.copy(), form.kernel)
    assert S.smallest_eigenvalue(form).lam == S.smallest_eigenvalue(same).lam


def test_point_removal_needs_inside_node():
    with pytest.raises(ValueError):
        S.point_removal_study(unit_square, (0.0, 0.0), 0.75, [1 / 8])


def test_richardson():
    # exact for errors linear in h
    assert S.richardson(3.0 + 0.4, 3.0 + 0.2) == pytest.approx(3.0)


def test_bbm_trend():
    rows = S.bbm_sweep(unit_square, 1 / 16, [0.6, 0.8, 0.9, 0.99], 2 * math.pi**2)
    scaled = [r.scaled for r in rows]
    assert all(np.diff(scaled) > 0)
    # the unnormalised planar seminorm converges to (pi/2) times the Dirichlet energy
    assert rows[-1].target_gradient == pytest.approx(math.pi**3)
    assert scaled[-1] == pytest.approx(math.pi**3, rel=0.03)
    assert S.bbm_sweep(unit_square, 1 / 8, []) == []


def test_k_sweep_chain():
    h = 1 / 4
    rows, spread = S.k_sweep(lambda k: (pipeline.omega_k(k, h), pipeline.shell_of(k, h)), [2, 5], 0.75)
    for r in rows:
        assert r.lam <= r.lam_shell + 1e-12 * r.lam_shell
        assert r.scaled == pytest.approx(r.k**0.75 * r.lam)
    assert spread >= 1
