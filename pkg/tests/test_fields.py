import numpy as np
import pytest

from conftest import make
from frontspeed.errors import EvaluationFailure, InvalidSpec
from frontspeed.fields import FieldDefs, catalog_defs, sample_fields, validate_fields
from frontspeed.grid import CellSpec, build_grid


@pytest.mark.parametrize("name", ["zero", "shear_sin", "shear_cos", "cellular", "log_phase"])
def test_catalog_fields_validate(name):
    _, f = make(name, 32)
    rep = validate_fields(f)
    assert rep.passed, rep.failures()


def test_strip_field_checks_walls():
    _, f = make("shear_cos", 32, geometry="strip")
    rep = validate_fields(f)
    assert rep.passed
    assert rep["drift_tangential"].passed
    assert rep["diffusion_wall_diagonal"].passed


def test_compressible_drift_is_flagged():
    g = build_grid(CellSpec(nx=32, ny=32))
    defs = FieldDefs(diffusion=lambda x, y: (1.0, 0.0, 1.0), zeta=lambda x, y: 1.0,
                     drift=lambda x, y: (np.sin(2 * np.pi * x), 0.0 * y))
    rep = validate_fields(sample_fields(g, defs))
    assert not rep["drift_divergence_free"].passed


def test_nonpositive_growth_is_flagged():
    _, f = make("shear_sin", 16, zeta_const=0.5, zeta_amp=1.0)
    assert not validate_fields(f)["growth_positive"].passed


def test_non_finite_closure_raises():
    g = build_grid(CellSpec(nx=16, ny=16))
    defs = FieldDefs(diffusion=lambda x, y: (1.0, 0.0, 1.0), zeta=lambda x, y: np.nan * x)
    with pytest.raises(EvaluationFailure):
        sample_fields(g, defs)


def test_unknown_catalog_name():
    with pytest.raises(InvalidSpec):
        catalog_defs("vortex_street")


def test_scaling_and_direction():
    _, f = make("cellular", 16)
    s = f.scaled(drift=3.0, diffusion=2.0, reaction=0.5)
    assert s.q_inf == pytest.approx(3 * f.q_inf)
    assert s.alpha1 == pytest.approx(2 * f.alpha1)
    assert s.zeta_inf == pytest.approx(0.5 * f.zeta_inf)
    np.testing.assert_allclose(f.with_direction((0.0, 2.0)).e_tilde, [0.0, 1.0])
    with pytest.raises(InvalidSpec):
        f.with_direction((0.0, 0.0))


def test_fourier_field_from_file(tmp_path):
    p = tmp_path / "modes.txt"
    p.write_text("# kx ky a_cos a_sin\n1 1 0.5 0.0\n0 2 0.0 1.0\n")
    g = build_grid(CellSpec(nx=32, ny=32))
    f = sample_fields(g, catalog_defs(f"fourier:{p}"))
    assert validate_fields(f).passed
    assert f.q_inf > 0
