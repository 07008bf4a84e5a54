import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make
from frontspeed.errors import NoChannel, NotDivergenceFree
from frontspeed.fields import FieldDefs, sample_fields
from frontspeed.first_integrals import drift_term
from frontspeed.grid import CellSpec, build_grid
from frontspeed.topology import (bump, channel_witness, classify_trajectories, periodic_components,
                                 positivity_criterion, primitive, solve_stream, stream_from_drift)


def tilted_shear(p, q, n=64):
    g = build_grid(CellSpec(nx=n, ny=n))
    defs = FieldDefs(diffusion=lambda x, y: (1.0, 0.0, 1.0), zeta=lambda x, y: 1.0 + 0 * x,
                     stream=lambda x, y: np.sin(2 * np.pi * (q * x - p * y)) / (2 * np.pi))
    return g, sample_fields(g, defs)


@given(st.integers(-50, 50), st.integers(-50, 50), st.integers(1, 9))
def test_primitive_is_canonical(p, q, k):
    a = primitive((k * p, k * q))
    if (p, q) == (0, 0):
        assert a == (0, 0)
    else:
        assert a == primitive((-p, -q))
        assert np.gcd(*a) == 1 and (a[0] > 0 or (a[0] == 0 and a[1] > 0))


@pytest.mark.parametrize("name", ["shear_sin", "cellular", "log_phase"])
def test_stream_function_reproduces_drift(name):
    g, f = make(name, 64)
    s = solve_stream(g, f)
    assert s.residual < 1e-10 * max(f.q_inf, 1.0)
    again = stream_from_drift(g, -s.phi_y, s.phi_x)[0]
    assert np.max(np.abs(again - s.phi)) < 1e-10 * np.ptp(s.phi)


def test_compressible_drift_rejected():
    g = build_grid(CellSpec(nx=32, ny=32))
    defs = FieldDefs(diffusion=lambda x, y: (1.0, 0.0, 1.0), zeta=lambda x, y: 1.0,
                     drift=lambda x, y: (np.sin(2 * np.pi * x), 0.0 * y))
    with pytest.raises(NotDivergenceFree):
        solve_stream(g, sample_fields(g, defs))


def test_shear_has_one_channel_along_e1(shear64):
    g, f = shear64
    rep = classify_trajectories(solve_stream(g, f))
    assert len(rep.regular_levels) == 129
    assert rep.has_unbounded_periodic and rep.shared_primitive
    assert rep.a == (1.0, 0.0)
    assert set(rep.windings()) == {(1, 0), (-1, 0)}
    assert positivity_criterion(rep, (1.0, 0.0)).limit_positive
    assert not positivity_criterion(rep, (0.0, 1.0)).limit_positive


@pytest.mark.parametrize("p,q", [(1, 1), (1, -2), (2, 1)])
def test_tilted_shear_winding(p, q):
    g, f = tilted_shear(p, q)
    rep = classify_trajectories(solve_stream(g, f))
    assert rep.primitive == primitive((p, q))
    assert rep.shared_primitive
    v = positivity_criterion(rep, (q, -p))  # direction normal to the channels
    assert not v.limit_positive


@pytest.mark.parametrize("name", ["cellular", "log_phase"])
def test_closed_or_non_periodic_trajectories(name):
    g, f = make(name, 64)
    s = solve_stream(g, f)
    rep = classify_trajectories(s)
    assert len(rep.regular_levels) == 129
    assert not rep.has_unbounded_periodic
    assert set(rep.windings()) == {(0, 0)}
    assert not positivity_criterion(rep, (1.0, 0.0)).limit_positive
    with pytest.raises(NoChannel):
        channel_witness(rep, s)


def test_level_functions_of_non_periodic_stream_have_no_drift():
    g, f = make("log_phase", 64)
    s = solve_stream(g, f)
    rng = np.random.default_rng(7)
    t = (s.phi - s.phi.min()) / np.ptp(s.phi)
    for _ in range(20):
        c = rng.normal(size=5)
        eta = sum(c[j] * np.cos(np.pi * j * t) for j in range(5))
        deta = sum(-c[j] * np.pi * j * np.sin(np.pi * j * t) for j in range(5)) / np.ptp(s.phi)
        d = drift_term(f, eta, grad=(deta * s.phi_x, deta * s.phi_y))
        assert np.max(np.abs(d.vector)) <= 1e-6 * f.q_inf * g.integrate(eta**2)


def test_strip_channel_and_witness():
    g, f = make("shear_cos", 64, geometry="strip")
    s = solve_stream(g, f)
    assert s.wall_spread < 1e-12
    rep = classify_trajectories(s)
    assert rep.a == (1.0, 0.0)
    w = channel_witness(rep, s)
    assert abs(w.drift[0]) > 1e-3 and abs(w.drift[1]) < 1e-12
    assert np.all(w.w >= 0) and w.w.max() <= 1.0


def test_bump_support():
    t = np.linspace(-2, 2, 401)
    b = bump(t, 0.0, 1.0)
    assert b.max() == pytest.approx(1.0)
    assert np.all(b[np.abs(t) >= 1] == 0)


def test_periodic_components_join_across_wraps():
    g = build_grid(CellSpec(nx=8, ny=8))
    mask = np.zeros(g.shape, dtype=bool)
    mask[0, 3] = mask[7, 3] = True
    mask[4, 0] = mask[4, 7] = True
    _, n = periodic_components(g, mask)
    assert n == 2
