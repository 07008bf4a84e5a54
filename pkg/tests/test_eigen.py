import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make
from frontspeed.eigen import assemble, k_of_lambda, principal_eigenpair, principal_eigenvalue
from oracles import shear_k

positive = st.floats(0.1, 8.0)


@given(positive, positive, st.floats(0.2, 4.0))
def test_constant_coefficients_have_closed_form(lp, M, zeta):
    _, f = make("zero", 16, zeta_const=zeta)
    r = principal_eigenvalue(f, lp, M)
    assert r.mu == pytest.approx((lp / M) ** 2 + zeta, rel=1e-12)
    assert np.allclose(r.psi, r.psi.mean())


@pytest.mark.parametrize("name,geometry", [("cellular", "torus"), ("shear_cos", "strip"),
                                           ("shear_sin", "torus")])
@pytest.mark.parametrize("lp,M", [(0.5, 1.0), (4.0, 8.0)])
def test_matches_dense_eigensolver(name, geometry, lp, M):
    _, f = make(name, 8, geometry=geometry, diffusion_offdiag=0.3 if geometry == "torus" else 0.0)
    op = assemble(f.grid, f, lp, M)
    dense = np.linalg.eigvals(op.matrix.toarray())
    r = principal_eigenpair(op)
    assert r.mu == pytest.approx(dense.real.max(), rel=1e-10)
    lo, hi = r.bounds
    assert lo - 1e-12 <= r.mu <= hi + 1e-12
    assert np.all(r.psi > 0)


def test_off_diagonal_entries_are_nonnegative():
    _, f = make("cellular", 16, diffusion_offdiag=0.4)
    op = assemble(f.grid, f, 2.0, 32.0)
    m = op.matrix.tocoo()
    off = m.data[m.row != m.col]
    assert off.min() >= 0


@given(st.floats(-3.0, 3.0))
@settings(max_examples=10)
def test_adding_constant_to_growth_shifts_mu(s):
    _, f = make("cellular", 16)
    _, g = make("cellular", 16, zeta_const=1.0 + s + 3.0)
    a = principal_eigenvalue(f, 1.5, 4.0).mu
    b = principal_eigenvalue(g, 1.5, 4.0).mu
    assert b - a == pytest.approx(s + 3.0, abs=1e-9)


@pytest.mark.parametrize("lam", [0.5, 1.0, 2.0])
def test_shear_matches_hill_oracle(shear64, lam):
    _, f = shear64
    assert k_of_lambda(f, lam, 1.0) == pytest.approx(shear_k(lam, 1.0), rel=2e-5)


def test_mu_stays_between_growth_extremes():
    _, f = make("cellular", 32, zeta_amp=0.5)
    for lp, M in [(0.1, 1.0), (1.0, 16.0)]:
        r = principal_eigenvalue(f, lp, M)
        c = f.zeta + (lp / M) ** 2
        assert c.min() - 1e-9 <= r.mu <= c.max() + 1e-9


def test_warm_start_is_accepted():
    _, f = make("cellular", 16)
    a = principal_eigenvalue(f, 1.0, 4.0)
    b = principal_eigenvalue(f, 1.05, 4.0, start=a.psi)
    c = principal_eigenvalue(f, 1.05, 4.0)
    assert b.mu == pytest.approx(c.mu, rel=1e-10)
    assert b.iterations <= c.iterations
