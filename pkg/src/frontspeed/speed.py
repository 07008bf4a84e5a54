"""Minimal front speed from the principal eigenvalue, and sweeps in M, eps, B.

``c*(M) = min_lam k(lam, M) / lam``.  With ``lp = lam M`` this is
``c*(M) / M = min_lp mu(lp, M) / lp``, which stays O(1) as M grows and is the
quantity minimised here.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .eigen import assemble, coefficients, principal_eigenpair
from .errors import BracketFailure, InvalidSpec, PreconditionViolation
from .fields import FieldSet
from .grid import build_grid

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
PROBE_DELTA = 1e-2
FIT_MODEL = "c+a/M"


@dataclass(frozen=True)
class SpeedOptions:
    tol: float = 1e-11
    rel_width: float = 1e-4
    lambda_min: float = 1e-8  # bounds on the unscaled decay rate
    lambda_max: float = 1e8
    max_grid_n: int = 128
    peclet_max: float = 0.5
    certificate_tol: float = 1e-9


@dataclass
class SpeedPoint:
    M: float
    lambda_star: float
    c_star: float
    k_at_min: float
    eps: float = 1.0
    B: float = 1.0
    grid_n: tuple = (0, 0)
    residual: float = 0.0
    evaluations: int = 0
    unimodal: bool = True
    certified: bool = True
    mu_bound_ok: bool = True
    probes: list = field(default_factory=list, repr=False)  # (lp, mu/lp) pairs

    @property
    def ratio(self) -> float:
        return self.c_star / self.M


@dataclass
class Extrapolation:
    value: float
    slope: float
    stderr: float
    rms: float
    uncertainty: float
    model: str
    n_points: int


@dataclass
class SpeedCurve:
    points: list
    ratios: np.ndarray
    limit: Extrapolation
    regime: str = "drift"
    eps: float = 1.0
    B: float = 1.0

    @property
    def c_inf(self) -> float:
        return self.limit.value

    @property
    def M_ladder(self) -> np.ndarray:
        return np.array([p.M for p in self.points])


@dataclass
class RegimeSweep:
    """Inner drift sweeps for each regime parameter and the outer extrapolation."""
    regime: str
    parameters: np.ndarray
    curves: list
    inner_limits: np.ndarray
    outer: Extrapolation


# -- one speed ------------------------------------------------------------------

def resolve_fields(fields: FieldSet, M: float, options: SpeedOptions) -> FieldSet:
    """Refine the grid until the cell Peclet number is bounded, up to the cap.

    A direction is refined only when the coefficients vary along it and the
    drift has a component along it; otherwise the discrete eigenfunction is
    invariant in that direction and upwinding adds no error there.
    """
    if fields.defs is None:
        return fields
    spec = fields.grid.spec
    nx, ny = spec.nx, spec.ny
    alpha = fields.alpha1
    arrays = (fields.A11, fields.A12, fields.A22, fields.q1, fields.q2, fields.zeta)
    varies_x = any(np.ptp(a, axis=0).max() > 1e-12 * max(np.abs(a).max(), 1e-300) for a in arrays)
    varies_y = any(np.ptp(a, axis=1).max() > 1e-12 * max(np.abs(a).max(), 1e-300) for a in arrays)
    qx = float(np.abs(fields.q1).max())
    qy = float(np.abs(fields.q2).max())
    while varies_x and M * qx * spec.L1 / nx / alpha > options.peclet_max and 2 * nx <= options.max_grid_n:
        nx *= 2
    while varies_y and M * qy * spec.L2 / ny / alpha > options.peclet_max and 2 * ny <= options.max_grid_n:
        ny *= 2
    if (nx, ny) == (spec.nx, spec.ny):
        return fields
    new = build_grid(type(spec)(spec.d, spec.L1, spec.L2, nx, ny, spec.geometry))
    return fields.resampled(new)


class _Objective:
    """``lp -> mu(lp, M) / lp`` with warm starts and a bound check per solve."""

    def __init__(self, fields: FieldSet, M: float, tol: float):
        self.fields, self.M, self.tol = fields, M, tol
        self.cache: dict = {}
        self.psi = None
        self.worst_residual = 0.0
        self.bound_ok = True

    def __call__(self, lp: float) -> float:
        if lp in self.cache:
            return self.cache[lp][0]
        op = assemble(self.fields.grid, self.fields, lp, self.M)
        res = principal_eigenpair(op, tol=self.tol, start=self.psi)
        self.psi = res.psi
        self.worst_residual = max(self.worst_residual, res.residual)
        _, _, c = coefficients(self.fields, lp, self.M)
        slack = 1e-9 * max(1.0, abs(res.mu))
        if not (c.min() - slack <= res.mu <= c.max() + slack) or not res.mu > 0:
            self.bound_ok = False
        self.cache[lp] = (res.mu / lp, res.mu)
        return res.mu / lp

    def mu(self, lp: float) -> float:
        self(lp)
        return self.cache[lp][1]

    def probes(self):
        return sorted((lp, v[0]) for lp, v in self.cache.items())


def is_unimodal(values: Sequence[float], tol: float) -> bool:
    """No strict rise followed by a strict fall, up to ``tol``."""
    v = np.asarray(values)
    k = int(np.argmin(v))
    left = np.diff(v[: k + 1])
    right = np.diff(v[k:])
    return bool(np.all(left <= tol) and np.all(right >= -tol))


def golden_section(func: Callable[[float], float], a: float, c: float, rel_width: float,
                   b: Optional[float] = None):
    """Minimise ``func(exp(u))`` over ``u`` in ``[log a, log c]``.

    Returns ``(x_best, f_best)``.  ``b`` is an interior point already known to
    beat both ends; it is reused as one of the two golden probes when it fits.
    """
    lo, hi = math.log(a), math.log(c)
    f = lambda u: func(math.exp(u))  # noqa: E731
    u1 = hi - GOLDEN * (hi - lo)
    u2 = lo + GOLDEN * (hi - lo)
    f1, f2 = f(u1), f(u2)
    while hi - lo > rel_width:
        if f1 <= f2:
            hi, u2, f2 = u2, u1, f1
            u1 = hi - GOLDEN * (hi - lo)
            f1 = f(u1)
        else:
            lo, u1, f1 = u1, u2, f2
            u2 = lo + GOLDEN * (hi - lo)
            f2 = f(u2)
    cands = [(f1, u1), (f2, u2)]
    if b is not None:
        cands.append((func(b), math.log(b)))
    fb, ub = min(cands)
    return math.exp(ub), fb


def bracket_minimum(func: Callable[[float], float], x0: float, lo_limit: float, hi_limit: float):
    """Expand ``x0 / 2, x0, 2 x0`` geometrically until the middle value is lowest."""
    a, b, c = x0 / 2.0, x0, 2.0 * x0
    fa, fb, fc = func(a), func(b), func(c)
    while not (fb <= fa and fb <= fc):
        if fa < fc:
            if a / 2.0 < lo_limit:
                raise BracketFailure("minimum lies below the lambda range",
                                     boundary_values={"lambda": a, "value": fa})
            a, b, c = a / 2.0, a, b
            fa, fb, fc = func(a), fa, fb
        else:
            if c * 2.0 > hi_limit:
                raise BracketFailure("minimum lies above the lambda range",
                                     boundary_values={"lambda": c, "value": fc})
            a, b, c = b, c, 2.0 * c
            fa, fb, fc = fb, fc, func(c)
    return a, b, c


def minimal_speed(grid, fields: FieldSet, M: float, options: SpeedOptions = SpeedOptions(),
                  eps: float = 1.0, B: float = 1.0, refine: bool = True) -> SpeedPoint:
    """Golden-section minimum of ``k(lam, M) / lam``."""
    if not M > 0:
        raise PreconditionViolation(f"M must be positive, got {M}")
    if grid is not None and grid.spec != fields.grid.spec:
        raise PreconditionViolation("fields were sampled on a different grid")
    if refine:
        fields = resolve_fields(fields, M, options)
    obj = _Objective(fields, M, options.tol)
    lp0 = M * math.sqrt(fields.zeta_mean)
    a, b, c = bracket_minimum(obj, lp0, M * options.lambda_min, M * options.lambda_max)
    lp_star, ratio = golden_section(obj, a, c, options.rel_width, b=b)
    mu_star = obj.mu(lp_star)
    tol = options.certificate_tol * max(1.0, abs(ratio))
    certified = all(obj(lp_star * (1 + s * PROBE_DELTA)) >= ratio - tol for s in (-1, 1))
    probes = obj.probes()
    return SpeedPoint(
        M=float(M), lambda_star=lp_star / M, c_star=ratio * M, k_at_min=mu_star,
        eps=eps, B=B, grid_n=(fields.grid.nx, fields.grid.ny), residual=obj.worst_residual,
        evaluations=len(probes), unimodal=is_unimodal([p[1] for p in probes], tol),
        certified=certified, mu_bound_ok=obj.bound_ok, probes=probes,
    )


# -- extrapolation --------------------------------------------------------------

def linear_extrapolation(x: np.ndarray, y: np.ndarray, model: str, floor_rel: float = 1e-6) -> Extrapolation:
    """Least-squares ``y = value + slope * x``; ``value`` is the limit at ``x = 0``.

    ``uncertainty`` is the largest of the intercept standard error, the RMS
    residual and a precision floor ``floor_rel * max|y|``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    X = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    n = len(x)
    rms = float(np.sqrt(np.mean(resid**2)))
    if n > 2:
        s2 = float(resid @ resid) / (n - 2)
        cov = s2 * np.linalg.inv(X.T @ X)
        stderr = float(np.sqrt(max(cov[0, 0], 0.0)))
    else:
        stderr = 0.0
    floor = floor_rel * float(np.max(np.abs(y))) if n else 0.0
    return Extrapolation(float(coef[0]), float(coef[1]), stderr, rms, max(stderr, rms, floor), model, n)


def fit_large_drift(M: np.ndarray, ratios: np.ndarray) -> Extrapolation:
    """Fit ``ratio = c_inf + a / M`` over the top decade of the ladder."""
    M = np.asarray(M, dtype=float)
    top = M >= M.max() / 10.0
    return linear_extrapolation(1.0 / M[top], np.asarray(ratios)[top], FIT_MODEL)


# -- sweeps ---------------------------------------------------------------------

def check_ladder(ladder, name: str, min_points: int = 1) -> np.ndarray:
    arr = np.asarray(ladder, dtype=float)
    if arr.ndim != 1 or arr.size < min_points:
        raise InvalidSpec(f"{name} needs at least {min_points} values")
    if not np.all(arr > 0):
        raise InvalidSpec(f"{name} values must be positive")
    return arr


def _map(func, items, jobs: int):
    if jobs <= 1:
        return [func(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(func, items))


def drift_sweep(grid, fields: FieldSet, M_ladder, options: SpeedOptions = SpeedOptions(),
                jobs: int = 1, eps: float = 1.0, B: float = 1.0, factor: float = 1.0,
                regime: str = "drift") -> SpeedCurve:
    """``c*(M)/M`` over an increasing ladder and its ``c_inf + a/M`` fit.

    ``factor`` multiplies every ratio (used by the regime sweeps).
    """
    M = check_ladder(M_ladder, "M_ladder", 4)
    if np.any(np.diff(M) <= 0):
        raise InvalidSpec("M_ladder must be strictly increasing")
    pts = _map(lambda m: minimal_speed(grid, fields, m, options, eps=eps, B=B), M, jobs)
    ratios = np.array([p.ratio for p in pts]) * factor
    return SpeedCurve(pts, ratios, fit_large_drift(M, ratios), regime, eps, B)


def small_reaction_sweep(grid, fields: FieldSet, eps_ladder, M_ladder,
                         options: SpeedOptions = SpeedOptions(), jobs: int = 1) -> RegimeSweep:
    """Inner limits of ``c*_{eps f}(M) / (M sqrt(eps))``, extrapolated linearly in ``sqrt(eps)``."""
    eps = check_ladder(eps_ladder, "eps_ladder", 2)
    if np.any(eps > 1) or np.any(np.diff(eps) >= 0):
        raise InvalidSpec("eps_ladder must decrease within (0, 1]")
    curves = [drift_sweep(grid, fields.scaled(reaction=float(e)), M_ladder, options, jobs,
                          eps=float(e), factor=1.0 / math.sqrt(e), regime="eps") for e in eps]
    inner = np.array([c.c_inf for c in curves])
    outer = linear_extrapolation(np.sqrt(eps), inner, "L+b*sqrt(eps)")
    return RegimeSweep("eps", eps, curves, inner, outer)


def large_diffusion_sweep(grid, fields: FieldSet, B_ladder, M_ladder,
                          options: SpeedOptions = SpeedOptions(), jobs: int = 1) -> RegimeSweep:
    """Inner limits of ``c*_{BA}(M) sqrt(B) / M``, extrapolated linearly in ``1/sqrt(B)``."""
    B = check_ladder(B_ladder, "B_ladder", 2)
    if np.any(B < 1) or np.any(np.diff(B) <= 0):
        raise InvalidSpec("B_ladder must increase from values >= 1")
    curves = [drift_sweep(grid, fields.scaled(diffusion=float(b)), M_ladder, options, jobs,
                          B=float(b), factor=math.sqrt(b), regime="B") for b in B]
    inner = np.array([c.c_inf for c in curves])
    outer = linear_extrapolation(1.0 / np.sqrt(B), inner, "L+b/sqrt(B)")
    return RegimeSweep("B", B, curves, inner, outer)


CSV_COLUMNS = ("M", "eps", "B", "lambda_star", "c_star", "ratio", "grid_n", "residual")


def curve_rows(curve: SpeedCurve):
    for p, r in zip(curve.points, curve.ratios):
        yield (p.M, p.eps, p.B, p.lambda_star, p.c_star, float(r), max(p.grid_n), p.residual)
