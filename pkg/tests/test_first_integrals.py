import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make
from frontspeed.errors import InvalidSpec, NotFirstIntegral, NotShear
from frontspeed.first_integrals import (CONVEX_DECREASING, INTERIOR_MIN, LEVEL_SET, SHEAR_EXACT,
                                        build_level_set_space, build_shear_space, check_lambda_grid,
                                        convexity_defect, drift_term, g_of_lambda, h_profile,
                                        large_drift_limit, mixed_limit, orthogonal_drift_bound)
from frontspeed.topology import classify_trajectories, solve_stream
from oracles import shear_g

# Frozen Hill-oracle values for the unit sine shear
G_AT_10 = 2.2329185594965324
LARGE_DRIFT_LIMIT = 0.22257682113393573
MIXED_LIMIT = 0.22507907903927651  # 1 / (sqrt(2) pi)


@pytest.fixture(scope="module")
def shear_space(shear64):
    g, f = shear64
    return build_shear_space(g, f)


@pytest.fixture(scope="module")
def level_space(shear64):
    g, f = shear64
    return build_level_set_space(solve_stream(g, f), K=64)


def test_frozen_values_match_live_oracle():
    assert shear_g(10.0) == pytest.approx(G_AT_10, rel=1e-9)
    assert MIXED_LIMIT == pytest.approx(1 / (np.sqrt(2) * np.pi), rel=1e-14)


def test_shear_space_g_matches_oracle(shear_space):
    assert shear_space.kind == SHEAR_EXACT
    assert g_of_lambda(shear_space, 10.0).g == pytest.approx(G_AT_10, rel=1e-3)


def test_level_set_space_agrees_with_shear_space(shear_space, level_space):
    assert level_space.kind == LEVEL_SET
    a = g_of_lambda(shear_space, 10.0).g
    b = g_of_lambda(level_space, 10.0).g
    assert b == pytest.approx(a, rel=0.02)
    assert mixed_limit(level_space) == pytest.approx(mixed_limit(shear_space), rel=0.02)


def test_shear_large_drift_limit(shear_space):
    lim = large_drift_limit(shear_space)
    assert lim.case == INTERIOR_MIN
    assert lim.limit == pytest.approx(LARGE_DRIFT_LIMIT, rel=1e-3)
    assert lim.bracket_lo <= lim.limit <= lim.bracket_hi
    assert lim.lambda0 == pytest.approx(9.193047821781665, rel=1e-2)


def test_shear_profile_checks(shear_space):
    prof = h_profile(shear_space)
    assert all(prof.checks.values()), prof.checks


def test_mixed_limit_matches_closed_form(shear_space):
    assert mixed_limit(shear_space) == pytest.approx(MIXED_LIMIT, rel=1e-3)


def test_mixed_limit_scales_with_diffusion(shear_space):
    base = mixed_limit(shear_space)
    assert mixed_limit(shear_space.with_diffusion_scale(4.0)) == pytest.approx(base / 2, rel=1e-12)


def test_single_element_gives_constants_only(shear64):
    g, f = shear64
    space = build_level_set_space(solve_stream(g, f), K=1)
    assert space.dim == 1
    assert g_of_lambda(space, 3.0).g == pytest.approx(f.zeta_mean, rel=1e-12)


def test_cellular_level_set_space_has_no_drift(cellular64):
    g, f = cellular64
    space = build_level_set_space(solve_stream(g, f), K=16)
    assert np.max(np.abs(space.drift)) < 1e-10 * f.q_inf
    lim = large_drift_limit(space)
    assert lim.case == CONVEX_DECREASING
    assert lim.bracket_lo <= 1e-9 <= lim.bracket_hi
    assert lim.bracket_hi - lim.bracket_lo <= f.zeta_inf / 1e3


def test_orthogonal_drift_vanishes_on_shear(shear_space):
    assert orthogonal_drift_bound(shear_space, (1.0, 0.0)) <= 1e-12


def test_not_shear(cellular64):
    g, f = cellular64
    with pytest.raises(NotShear):
        build_shear_space(g, f)


def test_drift_term_requires_first_integral(cellular64, shear64):
    g, f = cellular64
    X, _ = g.mesh
    with pytest.raises(NotFirstIntegral):
        drift_term(f, 1.0 + 0.5 * np.sin(2 * np.pi * X))
    g, f = shear64
    _, Y = g.mesh
    d = drift_term(f, 1.0 + np.sin(2 * np.pi * Y))
    # int sin(2 pi y) (1 + sin(2 pi y))^2 = 1
    assert d.along_e == pytest.approx(1.0, rel=1e-12)


def test_lambda_grid_validation():
    check_lambda_grid(np.logspace(-1, 3, 16))
    for bad in (np.logspace(-1, 3, 8), np.logspace(0, 2, 32), np.linspace(0.1, 1000, 32)):
        with pytest.raises(InvalidSpec):
            check_lambda_grid(bad)


@given(st.floats(0.0, 40.0), st.floats(0.01, 20.0))
@settings(max_examples=40)
def test_g_is_convex_and_above_mean_growth(shear_space, lam, step):
    xs = np.array([lam, lam + step, lam + 2 * step])
    ys = np.array([g_of_lambda(shear_space, x).g for x in xs])
    assert convexity_defect(xs, ys) >= -1e-9 * max(1.0, ys.max())
    assert ys.min() >= shear_space.fields.zeta_mean - 1e-10
