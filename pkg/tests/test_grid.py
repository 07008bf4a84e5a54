import numpy as np
import pytest
from hypothesis import given, strategies as st

from frontspeed.errors import InvalidSpec
from frontspeed.grid import STRIP, CellSpec, build_grid

even = st.integers(4, 40).map(lambda k: 2 * k)
lengths = st.floats(0.2, 5.0)


@pytest.mark.parametrize("spec", [
    CellSpec(L1=0.0), CellSpec(L2=-1.0), CellSpec(nx=7), CellSpec(ny=6), CellSpec(nx=33),
    CellSpec(geometry="annulus"), CellSpec(d=1), CellSpec(d=2, geometry=STRIP),
])
def test_rejects_bad_specs(spec):
    with pytest.raises(InvalidSpec):
        build_grid(spec)


@given(even, even, lengths, lengths)
def test_torus_weights_integrate_constants(nx, ny, L1, L2):
    g = build_grid(CellSpec(nx=nx, ny=ny, L1=L1, L2=L2))
    assert g.shape == (nx, ny)
    assert g.integrate(np.ones(g.shape)) == pytest.approx(L1 * L2, rel=1e-13)
    assert g.measure == pytest.approx(L1 * L2)


@given(even, even, lengths, lengths)
def test_strip_has_wall_rows_with_half_weight(nx, ny, L1, L2):
    g = build_grid(CellSpec(d=1, nx=nx, ny=ny, L1=L1, L2=L2, geometry=STRIP))
    assert g.shape == (nx, ny + 1)
    assert g.wall_rows() == (0, ny)
    assert g.y[-1] == pytest.approx(L2)
    assert g.weights[0, 0] == pytest.approx(0.5 * g.weights[0, 1])
    assert g.integrate(np.ones(g.shape)) == pytest.approx(L1 * L2, rel=1e-13)


def test_trapezoid_is_spectral_for_trig_polynomials():
    g = build_grid(CellSpec(nx=16, ny=16))
    X, Y = g.mesh
    f = np.sin(2 * np.pi * X) ** 2 * np.cos(4 * np.pi * Y) ** 2
    assert g.integrate(f) == pytest.approx(0.25, abs=1e-14)


@given(st.integers(0, 31), st.integers(0, 31), st.integers(-40, 40), st.integers(-40, 40))
def test_shift_wraps_periodically(i, j, di, dj):
    g = build_grid(CellSpec(nx=32, ny=32))
    v = np.arange(g.size, dtype=float).reshape(g.shape)
    s = g.shift(v, di, dj)
    assert s[i, j] == v[(i + di) % 32, (j + dj) % 32]


def test_refined_keeps_cell():
    spec = CellSpec(L1=2.0, L2=0.5, nx=16, ny=32)
    r = spec.refined(64)
    assert (r.nx, r.ny, r.L1, r.L2, r.geometry) == (64, 64, 2.0, 0.5, spec.geometry)
