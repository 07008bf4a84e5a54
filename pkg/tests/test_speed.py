import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import make
from frontspeed.errors import InvalidSpec, PreconditionViolation
from frontspeed.speed import (SpeedOptions, drift_sweep, fit_large_drift, golden_section, is_unimodal,
                              large_diffusion_sweep, linear_extrapolation, minimal_speed,
                              resolve_fields, small_reaction_sweep)
from oracles import shear_speed

# Hill-equation oracle values for the unit sine shear, frozen from tests/oracles.py
SHEAR_SPEED = {1.0: 2.0126218116793986, 2.0: 2.04998201614404, 4.0: 2.192615372036354}


@pytest.mark.parametrize("zeta", [1.0, 4.0])
def test_zero_drift_speed_is_twice_root_growth(zeta):
    g, f = make("zero", 16, zeta_const=zeta)
    p = minimal_speed(g, f, 1.0)
    assert p.c_star == pytest.approx(2 * math.sqrt(zeta), rel=1e-7)
    assert p.lambda_star == pytest.approx(math.sqrt(zeta), rel=1e-3)
    assert p.certified and p.mu_bound_ok and p.unimodal


@pytest.mark.parametrize("M", sorted(SHEAR_SPEED))
def test_shear_speed_matches_frozen_oracle(M):
    g, f = make("shear_sin", 32)
    p = minimal_speed(g, f, M)
    assert p.c_star == pytest.approx(SHEAR_SPEED[M], rel=1e-3)
    assert p.certified and p.mu_bound_ok


def test_frozen_values_agree_with_live_oracle():
    for M, c in SHEAR_SPEED.items():
        assert shear_speed(M) == pytest.approx(c, rel=1e-9)


def test_speed_rejects_bad_inputs():
    g, f = make("zero", 16)
    with pytest.raises(PreconditionViolation):
        minimal_speed(g, f, 0.0)
    g2, _ = make("zero", 32)
    with pytest.raises(PreconditionViolation):
        minimal_speed(g2, f, 1.0)


@given(st.floats(0.01, 100.0), st.floats(0.1, 4))
def test_golden_section_finds_log_parabola_minimum(x0, w):
    xm, fm = golden_section(lambda x: w * math.log(x / x0) ** 2 + 1.0, x0 / 50, x0 * 70, 1e-6)
    assert xm == pytest.approx(x0, rel=1e-5)
    assert fm == pytest.approx(1.0, abs=1e-9)


def test_unimodality_detector():
    assert is_unimodal([5, 3, 2, 2.5, 4], 1e-12)
    assert not is_unimodal([5, 3, 4, 2, 6], 1e-12)


@given(st.floats(-2, 2), st.floats(-5, 5))
def test_linear_extrapolation_recovers_exact_line(c, a):
    x = np.array([1.0, 0.5, 0.25, 0.125])
    fit = linear_extrapolation(x, c + a * x, "test")
    assert fit.value == pytest.approx(c, abs=1e-10)
    assert fit.slope == pytest.approx(a, abs=1e-9)
    assert fit.rms < 1e-10


def test_fit_uses_top_decade():
    M = 2.0 ** np.arange(11)
    ratios = 0.3 + 2.0 / M
    ratios[:3] += 1.0  # ignored: outside the top decade
    fit = fit_large_drift(M, ratios)
    assert fit.value == pytest.approx(0.3, abs=1e-12)
    assert fit.n_points == 4


def test_refinement_only_where_needed(shear64):
    _, f = shear64
    assert resolve_fields(f, 1024.0, SpeedOptions()) is f  # shear along e1 is x-invariant
    _, cell = make("cellular", 16)
    r = resolve_fields(cell, 64.0, SpeedOptions(max_grid_n=64))
    assert (r.grid.nx, r.grid.ny) == (64, 64)


def test_drift_sweep_ratio_and_ladder_checks():
    g, f = make("shear_sin", 32)
    curve = drift_sweep(g, f, [1.0, 2.0, 4.0, 8.0])
    np.testing.assert_allclose(curve.ratios[:3], [SHEAR_SPEED[m] / m for m in (1.0, 2.0, 4.0)], rtol=1e-3)
    for bad in ([1.0, 2.0, 4.0], [1.0, 4.0, 2.0, 8.0], [0.0, 1.0, 2.0, 4.0]):
        with pytest.raises(InvalidSpec):
            drift_sweep(g, f, bad)


def test_regime_sweeps_on_zero_drift():
    # q = 0: c* = 2 sqrt(eps zeta) and c*_{BA} = 2 sqrt(B zeta), both independent of M
    g, f = make("zero", 16)
    M = [1.0, 2.0, 4.0, 8.0]
    eps = small_reaction_sweep(g, f, [1.0, 0.25], M)
    for c in eps.curves:
        np.testing.assert_allclose(c.ratios * np.array(M), 2.0, rtol=1e-6)
    big = large_diffusion_sweep(g, f, [1.0, 4.0], M)
    for c in big.curves:
        np.testing.assert_allclose(c.ratios * np.array(M), 2.0 * c.B, rtol=1e-6)
    with pytest.raises(InvalidSpec):
        small_reaction_sweep(g, f, [0.5, 1.0], M)
    with pytest.raises(InvalidSpec):
        large_diffusion_sweep(g, f, [0.5, 2.0], M)
