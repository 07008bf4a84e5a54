"""Principal eigenpair of the rescaled linearized operator.

For a drift amplitude ``M`` and a rescaled decay rate ``lp`` the operator is

    div(A grad psi) + 2 (lp/M) e.A grad psi + M q.grad psi
        + [(lp/M)^2 e.A e + lp q.e + (lp/M) div(A e) + zeta] psi

on the periodicity cell, with the conormal condition
``nu.A grad psi = -(lp/M)(nu.A e) psi`` on strip walls.  Its principal
eigenvalue ``mu(lp, M)`` equals ``k(lp/M, M)``.

Diffusion is centred in flux form, first-order terms are upwinded and the
mixed derivative uses the sign-dependent positive stencil, so every
off-diagonal entry is nonnegative.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import AssemblyFailure, NoConvergence, PositivityLoss, PreconditionViolation
from .fields import FieldSet
from .grid import Grid

NEIGHBOURS = ((1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, -1), (1, -1), (-1, 1))


@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    matrix: sp.csr_matrix
    grid: Grid
    lambda_prime: float
    M: float
    shift: float  # matrix + shift*I is entrywise nonnegative
    scale: float  # magnitude of the largest coefficient, for tolerances
    stencil: str = "flux-centred diffusion, first-order upwind transport"


@dataclass(frozen=True, eq=False)
class EigenResult:
    mu: float
    psi: np.ndarray
    residual: float
    iterations: int
    bounds: tuple  # Collatz-Wielandt enclosure of mu

    @property
    def shape(self):
        return self.psi.shape


def _yshift(grid: Grid, values: np.ndarray, dj: int, parity: int = 1) -> np.ndarray:
    """``values[i, j + dj]``; on the strip rows beyond a wall are reflected."""
    if not grid.is_strip:
        return np.roll(values, -dj, axis=1)
    ext = np.concatenate([parity * values[:, 1:2], values, parity * values[:, -2:-1]], axis=1)
    return ext[:, 1 + dj: 1 + dj + grid.n_rows]


def _xshift(values: np.ndarray, di: int) -> np.ndarray:
    return np.roll(values, -di, axis=0)


def _ddx(grid, v):
    return (_xshift(v, 1) - _xshift(v, -1)) / (2 * grid.hx)


def _ddy(grid, v, parity=1):
    return (_yshift(grid, v, 1, parity) - _yshift(grid, v, -1, parity)) / (2 * grid.hy)


def divergence_A_e(fields: FieldSet) -> np.ndarray:
    """Centred-difference ``div(A e)``."""
    g, e = fields.grid, fields.e_tilde
    col1 = e[0] * fields.A11 + e[1] * fields.A12
    col2 = e[0] * fields.A12 + e[1] * fields.A22
    return _ddx(g, col1) + _ddy(g, col2, parity=-1 if e[1] == 0 else 1)


def coefficients(fields: FieldSet, lambda_prime: float, M: float):
    """Per-node drift ``(bx, by)`` and zero-order term ``c`` of the operator."""
    g, e = fields.grid, fields.e_tilde
    r = lambda_prime / M
    A11, A12, A22 = fields.A11, fields.A12, fields.A22
    bx = M * fields.q1 + 2 * r * (A11 * e[0] + A12 * e[1]) + _ddy(g, A12, parity=-1)
    by = M * fields.q2 + 2 * r * (A12 * e[0] + A22 * e[1]) + _ddx(g, A12)
    if g.is_strip:
        by = by.copy()
        by[:, list(g.wall_rows())] = 0.0
    c = r * r * fields.eAe + lambda_prime * fields.q_dot_e + r * divergence_A_e(fields) + fields.zeta
    return bx, by, c


def stencil_weights(fields: FieldSet, lambda_prime: float, M: float):
    """Neighbour weights ``{(di, dj): array}`` and the diagonal array."""
    g = fields.grid
    hx, hy = g.hx, g.hy
    bx, by, c = coefficients(fields, lambda_prime, M)
    A11, A12, A22 = fields.A11, fields.A12, fields.A22
    axp = 0.5 * (A11 + _xshift(A11, 1)) / hx**2
    axm = 0.5 * (A11 + _xshift(A11, -1)) / hx**2
    ayp = 0.5 * (A22 + _yshift(g, A22, 1)) / hy**2
    aym = 0.5 * (A22 + _yshift(g, A22, -1)) / hy**2
    cross = np.abs(A12) / (hx * hy)
    pos, neg = np.maximum(A12, 0) / (hx * hy), np.maximum(-A12, 0) / (hx * hy)
    w = {
        (1, 0): axp + np.maximum(bx, 0) / hx - cross,
        (-1, 0): axm - np.minimum(bx, 0) / hx - cross,
        (0, 1): ayp + np.maximum(by, 0) / hy - cross,
        (0, -1): aym - np.minimum(by, 0) / hy - cross,
        (1, 1): pos, (-1, -1): pos, (1, -1): neg, (-1, 1): neg,
    }
    diag = c - (axp + axm + ayp + aym) - np.abs(bx) / hx - np.abs(by) / hy + 2 * cross
    return w, diag


def _fold_rows(grid: Grid, j: np.ndarray) -> np.ndarray:
    """Ghost rows beyond a strip wall map to their mirror images."""
    if not grid.is_strip:
        return np.mod(j, grid.ny)
    j = np.where(j < 0, -j, j)
    return np.where(j > grid.ny, 2 * grid.ny - j, j)


def assemble(grid: Grid, fields: FieldSet, lambda_prime: float, M: float) -> DiscreteOperator:
    if not (lambda_prime > 0):
        raise PreconditionViolation(f"lambda' must be positive, got {lambda_prime}")
    if not (M > 0):
        raise PreconditionViolation(f"M must be positive, got {M}")
    if fields.grid.spec != grid.spec:
        raise PreconditionViolation("fields were sampled on a different grid")
    w, diag = stencil_weights(fields, lambda_prime, M)
    if not np.all(np.isfinite(diag)) or not all(np.all(np.isfinite(v)) for v in w.values()):
        raise AssemblyFailure("non-finite operator coefficient")
    worst = min(float(v.min()) for v in w.values())
    scale = max(float(np.max(np.abs(diag))), max(float(v.max()) for v in w.values()), 1.0)
    if worst < -1e-12 * scale:
        raise AssemblyFailure(
            f"negative off-diagonal weight {worst:.3g}; the mixed-derivative stencil needs "
            "|A12| <= min(A11 hy/hx, A22 hx/hy) up to the upwind margin")
    I, J = np.meshgrid(np.arange(grid.nx), np.arange(grid.n_rows), indexing="ij")
    rows = [I.ravel() * grid.n_rows + J.ravel()]
    cols = [rows[0]]
    vals = [diag.ravel()]
    for (di, dj), v in w.items():
        mask = v.ravel() != 0
        if not mask.any():
            continue
        ci = np.mod(I + di, grid.nx)
        cj = _fold_rows(grid, J + dj)
        rows.append(rows[0][mask])
        cols.append((ci * grid.n_rows + cj).ravel()[mask])
        vals.append(np.maximum(v.ravel()[mask], 0.0))
    n = grid.size
    mat = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                        shape=(n, n)).tocsr()
    mat.sum_duplicates()
    shift = max(0.0, -float(mat.diagonal().min()))
    return DiscreteOperator(mat, grid, float(lambda_prime), float(M), shift, scale)


def _normalize(grid: Grid, x: np.ndarray) -> np.ndarray:
    return x / np.sqrt(np.sum(grid.weights.ravel() * x * x))


def principal_eigenpair(op: DiscreteOperator, tol: float = 1e-11, max_iter: int = 500,
                        start: Optional[np.ndarray] = None) -> EigenResult:
    """Perron eigenpair by shifted inverse iteration.

    With ``x > 0`` the Collatz-Wielandt ratios ``(L x)_i / x_i`` enclose the
    principal eigenvalue.  The shift is kept just above the upper ratio, so
    ``(s I - L)`` is a nonsingular M-matrix with a positive inverse and every
    iterate stays positive.  Stops when the enclosure is narrower than
    ``tol * max(1, |mu|)``, or when the residual and the Rayleigh quotient
    have both settled below that level or the rounding floor of the matrix.
    """
    L = op.matrix
    n = L.shape[0]
    x = np.ones(n) if start is None else np.asarray(start, dtype=float).ravel().copy()
    if x.shape[0] != n or not np.all(x > 0):
        x = np.ones(n)
    x /= x.max()
    eye = sp.identity(n, format="csc")
    lu = None
    width_at_factor = np.inf
    mu_prev = np.nan
    floor = 100 * np.finfo(float).eps * op.scale
    for it in range(max_iter + 1):
        y = L @ x
        ratios = y / x
        lo, hi = float(ratios.min()), float(ratios.max())
        width = hi - lo
        mu_scale = max(1.0, abs(hi))
        if width <= tol * mu_scale:
            mu = 0.5 * (lo + hi)
            return _result(op, x, mu, it, (lo, hi))
        mu_rq = float(x @ y) / float(x @ x)
        res = float(np.max(np.abs(y - mu_rq * x)))
        settle = max(tol * mu_scale, floor)
        if res <= settle and abs(mu_rq - mu_prev) <= settle:
            return _result(op, x, mu_rq, it, (lo, hi))
        mu_prev = mu_rq
        if it == max_iter:
            break
        if lu is None or width < 0.01 * width_at_factor:
            s = hi + max(width, 1e-10 * mu_scale)
            lu = splu((s * eye - L).tocsc())
            width_at_factor = width
        x = lu.solve(x)
        top = x.max()
        if not top > 0:
            raise PositivityLoss("inverse iterate lost positivity")
        x /= top
        if x.min() <= 0:
            raise PositivityLoss(f"iterate has non-positive entries (min {x.min():.3g})")
    raise NoConvergence(f"no convergence after {max_iter} iterations: enclosure [{lo:.12g}, {hi:.12g}]")


def _result(op, x, mu, it, bounds) -> EigenResult:
    psi = _normalize(op.grid, x)
    residual = float(np.max(np.abs(op.matrix @ psi - mu * psi)) / np.max(psi))
    return EigenResult(float(mu), psi.reshape(op.grid.shape), residual, it, bounds)


def principal_eigenvalue(fields: FieldSet, lambda_prime: float, M: float, tol: float = 1e-11,
                         start=None) -> EigenResult:
    """Assemble and solve in one call."""
    op = assemble(fields.grid, fields, lambda_prime, M)
    return principal_eigenpair(op, tol=tol, start=start)


def k_of_lambda(fields: FieldSet, lam: float, M: float = 1.0, tol: float = 1e-11) -> float:
    """Unscaled principal eigenvalue ``k(lam, M) = mu(lam M, M)``."""
    return principal_eigenvalue(fields, lam * M, M, tol=tol).mu
