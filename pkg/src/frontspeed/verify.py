"""Cross-checks between the eigenvalue, variational and topological routes.

Also hosts the numerical checks of the intermediate identities and a direct
time integration of the reaction-advection-diffusion equation.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .eigen import _ddx, _ddy, divergence_A_e, principal_eigenvalue
from .errors import CFLViolation, NoFront, NotShear, PreconditionViolation
from .fields import FieldSet
from .first_integrals import (LimitResult, build_level_set_space, build_shear_space, drift_term,
                              large_drift_limit, mixed_limit)
from .grid import Grid
from .speed import (SpeedOptions, check_ladder, drift_sweep, large_diffusion_sweep, minimal_speed,
                    small_reaction_sweep)
from .topology import (PositivityVerdict, classify_trajectories, periodic_components,
                       positivity_criterion, solve_stream)

log = logging.getLogger(__name__)


# -- decomposition identity -----------------------------------------------------

def decomposition_terms(fields: FieldSet, psi: np.ndarray, mu: float, lambda_prime: float,
                        M: float, w: np.ndarray) -> dict:
    """Terms of the identity obtained by testing the eigen-equation with ``w^2 / psi``.

    For a first integral ``w`` the transport term integrates to zero and

        mu int w^2 = D_A + lp int (q.e) w^2 + int (zeta w^2 - grad w.A grad w)

    with ``D_A = int X.A X`` and ``X = w grad log psi - grad w + (lp/M) w e``.
    """
    g = fields.grid
    e = fields.e_tilde
    r = lambda_prime / M
    vx, vy = _ddx(g, psi) / psi, _ddy(g, psi) / psi
    wx, wy = _ddx(g, w), _ddy(g, w)
    X1 = w * vx - wx + r * w * e[0]
    X2 = w * vy - wy + r * w * e[1]
    quad = lambda a, b: fields.A11 * a[0] * b[0] + fields.A12 * (a[0] * b[1] + a[1] * b[0]) \
        + fields.A22 * a[1] * b[1]  # noqa: E731
    w2 = w * w
    return {
        "mass": g.integrate(w2),
        "square": g.integrate(quad((X1, X2), (X1, X2))),
        "drift": g.integrate(fields.q_dot_e * w2),
        "growth": g.integrate(fields.zeta * w2),
        "energy": g.integrate(quad((wx, wy), (wx, wy))),
        "mu": mu,
    }


def decomposition_identity_check(grid: Grid, fields: FieldSet, lambda_prime: float, M: float,
                                 w: np.ndarray, first_integral_tol: float = 1e-6) -> float:
    """Relative residual of the tested identity, divided through by ``lp``."""
    if grid.spec != fields.grid.spec:
        raise PreconditionViolation("fields were sampled on a different grid")
    w = np.asarray(w, dtype=float)
    drift_term(fields, w, tol=first_integral_tol)
    eig = principal_eigenvalue(fields, lambda_prime, M)
    t = decomposition_terms(fields, eig.psi, eig.mu, lambda_prime, M, w)
    lhs = t["mu"] / lambda_prime * t["mass"]
    rhs = t["square"] / lambda_prime + t["drift"] + (t["growth"] - t["energy"]) / lambda_prime
    return abs(lhs - rhs) / abs(lhs)


# -- first-integral property of the limit eigenfunction ---------------------------

@dataclass
class DecayTable:
    M: np.ndarray
    r: np.ndarray  # |q.grad psi|_{L2} for the normalized eigenfunction
    mu: np.ndarray
    level_variance: np.ndarray  # spread of psi within level bands of phi, relative to int psi^2
    decreasing_top_decade: bool
    top_ratio: float  # r at the largest M over r at the start of the top decade
    floor: np.ndarray  # rounding level of r; values below it count as zero

    def rows(self):
        for row in zip(self.M, self.r, self.mu, self.level_variance):
            yield tuple(float(v) for v in row)


def transport_norm(fields: FieldSet, psi: np.ndarray) -> float:
    g = fields.grid
    return math.sqrt(g.integrate((fields.q1 * _ddx(g, psi) + fields.q2 * _ddy(g, psi)) ** 2))


def level_set_variance(fields: FieldSet, phi: np.ndarray, psi: np.ndarray, bins: int = 64) -> float:
    """Within-band variance of ``psi`` over connected level bands of ``phi``, over ``int psi^2``.

    Tends to zero with the band width when ``psi`` is a function of ``phi`` on
    each band component.
    """
    g = fields.grid
    span = float(np.ptp(phi))
    total = g.integrate(psi**2)
    if span <= 0 or total <= 0:
        return float("nan")
    edges = np.linspace(phi.min(), phi.max(), bins + 1)
    band = np.clip(np.searchsorted(edges, phi, side="right") - 1, 0, bins - 1)
    W = g.weights
    within = 0.0
    for b in range(bins):
        labels, n = periodic_components(g, band == b)
        for lab in range(1, n + 1):
            m = labels == lab
            wt = W[m]
            mean = float(np.sum(wt * psi[m]) / np.sum(wt))
            within += float(np.sum(wt * (psi[m] - mean) ** 2))
    return within / total


def eigenfunction_first_integral_check(grid: Grid, fields: FieldSet, lambda_prime: float,
                                       M_ladder, tol: float = 1e-11) -> DecayTable:
    """``|q.grad psi|`` along an increasing drift ladder at fixed ``lp``.

    Values at the rounding floor ``1e-10 |q|_inf |grad psi|`` count as zero,
    so an eigenfunction that is already a first integral (a shear along its
    own direction) gives a zero table that passes.
    """
    if grid.spec != fields.grid.spec:
        raise PreconditionViolation("fields were sampled on a different grid")
    M = check_ladder(M_ladder, "M_ladder", 2)
    if np.any(np.diff(M) <= 0):
        raise PreconditionViolation("M_ladder must be strictly increasing")
    phi = None
    if fields.q_inf > 0:
        phi = solve_stream(grid, fields).phi
    r, mus, var, floor = [], [], [], []
    start = None
    for m in M:
        eig = principal_eigenvalue(fields, lambda_prime, float(m), tol=tol, start=start)
        start = eig.psi
        r.append(transport_norm(fields, eig.psi))
        grad = math.sqrt(grid.integrate(_ddx(grid, eig.psi) ** 2 + _ddy(grid, eig.psi) ** 2))
        floor.append(1e-10 * fields.q_inf * grad)
        mus.append(eig.mu)
        var.append(level_set_variance(fields, phi, eig.psi) if phi is not None else float("nan"))
    r, floor = np.array(r), np.array(floor)
    top = M >= M.max() / 10.0
    rt = np.where(r > floor, r, 0.0)[top]
    decreasing = bool(np.all(np.diff(rt) <= 0))
    ratio = float(rt[-1] / rt[0]) if rt[0] > 0 else 0.0
    return DecayTable(M, r, np.array(mus), np.array(var), decreasing, ratio, floor)


# -- direct simulation ---------------------------------------------------------------

@dataclass(frozen=True)
class SimulationOptions:
    dt: float = 0.01
    T_final: float = 40.0
    domain_repeats: int = 96
    start_fraction: float = 0.1  # initial burnt zone at the +x end, as a fraction of the domain
    sample_every: float = 0.1


@dataclass
class FrontSpeed:
    speed: float
    times: np.ndarray
    positions: np.ndarray
    fit_residual: float


def _diffusion_matrix(A11, A12, A22, hx, hy, strip: bool) -> sp.csr_matrix:
    """Flux-form ``div(A grad u)`` with mirror ghosts at x ends and strip walls."""
    nx, nr = A11.shape
    I, J = np.meshgrid(np.arange(nx), np.arange(nr), indexing="ij")

    def fold_x(i):
        i = np.where(i < 0, -i, i)
        return np.where(i > nx - 1, 2 * (nx - 1) - i, i)

    def fold_y(j):
        if not strip:
            return np.mod(j, nr)
        j = np.where(j < 0, -j, j)
        return np.where(j > nr - 1, 2 * (nr - 1) - j, j)

    def at(a, di, dj):
        return a[fold_x(I + di), fold_y(J + dj)]

    axp = 0.5 * (A11 + at(A11, 1, 0)) / hx**2
    axm = 0.5 * (A11 + at(A11, -1, 0)) / hx**2
    ayp = 0.5 * (A22 + at(A22, 0, 1)) / hy**2
    aym = 0.5 * (A22 + at(A22, 0, -1)) / hy**2
    entries = {(1, 0): axp, (-1, 0): axm, (0, 1): ayp, (0, -1): aym}
    diag = -(axp + axm + ayp + aym)
    if np.any(A12):
        c = 0.5 * A12 / (hx * hy)
        dA_x = (at(A12, 1, 0) - at(A12, -1, 0)) / (2 * hx)
        dA_y = (at(A12, 0, 1) - at(A12, 0, -1)) / (2 * hy)
        entries.update({(1, 1): c, (-1, -1): c, (1, -1): -c, (-1, 1): -c})
        entries[(0, 1)] = entries[(0, 1)] + dA_x / (2 * hy)
        entries[(0, -1)] = entries[(0, -1)] - dA_x / (2 * hy)
        entries[(1, 0)] = entries[(1, 0)] + dA_y / (2 * hx)
        entries[(-1, 0)] = entries[(-1, 0)] - dA_y / (2 * hx)
    idx = lambda i, j: (i * nr + j).ravel()  # noqa: E731
    rows, cols, vals = [idx(I, J)], [idx(I, J)], [diag.ravel()]
    for (di, dj), v in entries.items():
        rows.append(idx(I, J))
        cols.append(idx(fold_x(I + di), fold_y(J + dj)))
        vals.append(v.ravel())
    n = nx * nr
    return sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(n, n)).tocsr()


def _upwind_transport(u, b1, b2, hx, hy, strip: bool):
    """First-order upwind ``b.grad u`` with mirror ghosts; matches the eigen stencil."""
    up = np.concatenate([u[1:], u[-2:-1]], axis=0)
    um = np.concatenate([u[1:2], u[:-1]], axis=0)
    if strip:
        vp = np.concatenate([u[:, 1:], u[:, -2:-1]], axis=1)
        vm = np.concatenate([u[:, 1:2], u[:, :-1]], axis=1)
    else:
        vp, vm = np.roll(u, -1, axis=1), np.roll(u, 1, axis=1)
    return (np.maximum(b1, 0) * (up - u) + np.minimum(b1, 0) * (u - um)) / hx + \
        (np.maximum(b2, 0) * (vp - u) + np.minimum(b2, 0) * (u - vm)) / hy


def _half_crossing(profile: np.ndarray, hx: float) -> Optional[float]:
    """Position where an x-profile rising towards +x first reaches 1/2 from the +x side."""
    above = profile >= 0.5
    if above.all() or not above.any():
        return None
    i = int(np.flatnonzero(~above)[-1])  # last unburnt node
    if i + 1 >= profile.size:
        return None
    a, b = profile[i], profile[i + 1]
    return (i + (0.5 - a) / (b - a)) * hx


def direct_front_speed(grid: Grid, fields: FieldSet, M: float,
                       sim: SimulationOptions = SimulationOptions()) -> FrontSpeed:
    """Speed of the front invading the unburnt state in the ``-x`` direction.

    Implicit diffusion, explicit upwind transport and explicit reaction on
    ``domain_repeats`` copies of the cell along x, started from a step.  The
    speed is the least-squares slope of the 1/2-crossing of the y-averaged
    profile over the second half of the run.
    """
    if grid.spec != fields.grid.spec:
        raise PreconditionViolation("fields were sampled on a different grid")
    if M < 0:
        raise PreconditionViolation(f"M must be nonnegative, got {M}")
    h = max(grid.hx, grid.hy)
    if M > 0 and M * fields.q_inf * h / fields.alpha1 > 0.5:
        raise PreconditionViolation(
            f"cell Peclet number {M * fields.q_inf * h / fields.alpha1:.3g} exceeds 0.5; refine the grid")
    R = int(sim.domain_repeats)
    if R < 2:
        raise PreconditionViolation("domain_repeats must be at least 2")
    tile = lambda a: np.tile(a, (R, 1))  # noqa: E731
    b1 = M * tile(fields.q1) if M > 0 else np.zeros((R * grid.nx, grid.n_rows))
    b2 = M * tile(fields.q2) if M > 0 else np.zeros_like(b1)
    cfl = sim.dt * float(np.max(np.abs(b1) / grid.hx + np.abs(b2) / grid.hy))
    if cfl > 1.0:
        raise CFLViolation(f"advective CFL number {cfl:.3g} exceeds 1")
    if sim.dt * fields.zeta_inf > 0.5:
        raise CFLViolation(f"reaction step dt*zeta = {sim.dt * fields.zeta_inf:.3g} exceeds 0.5")
    L = _diffusion_matrix(tile(fields.A11), tile(fields.A12), tile(fields.A22),
                          grid.hx, grid.hy, grid.is_strip)
    n = L.shape[0]
    lu = splu((sp.identity(n, format="csc") - sim.dt * L).tocsc())
    nx_tot = R * grid.nx
    x = np.arange(nx_tot) * grid.hx
    length = x[-1]
    u = np.zeros((nx_tot, grid.n_rows))
    u[x >= (1 - sim.start_fraction) * length] = 1.0
    row_w = grid.weights[0] / np.sum(grid.weights[0])
    steps = int(round(sim.T_final / sim.dt))
    every = max(1, int(round(sim.sample_every / sim.dt)))
    times, pos = [], []
    margin = 2 * grid.spec.L1
    for k in range(1, steps + 1):
        rhs = u + sim.dt * (_upwind_transport(u, b1, b2, grid.hx, grid.hy, grid.is_strip)
                            + fields.reaction(u))
        u = lu.solve(rhs.ravel()).reshape(u.shape)
        if k % every:
            continue
        p = _half_crossing(u @ row_w, grid.hx)
        if p is None:
            raise NoFront(f"no 1/2 crossing at t = {k * sim.dt:.3g}")
        if p < margin:
            raise NoFront(f"front reached the domain end at t = {k * sim.dt:.3g}; add repeats")
        times.append(k * sim.dt)
        pos.append(p)
    times = np.array(times)
    pos = np.array(pos)
    late = times >= 0.5 * sim.T_final
    if late.sum() < 3:
        raise NoFront("too few samples in the second half of the run")
    coef = np.polyfit(times[late], pos[late], 1)
    speed = -float(coef[0])
    if not speed > 1e-8:
        raise NoFront(f"front stalled (slope {speed:.3g})")
    resid = pos[late] - np.polyval(coef, times[late])
    return FrontSpeed(speed, times, pos, float(np.sqrt(np.mean(resid**2))))


# -- homogenized regime ---------------------------------------------------------------

@dataclass
class HomogenizedComparison:
    gamma: float
    M: np.ndarray
    ratios: np.ndarray  # c*(M) / sqrt(M) for diffusion M A and drift M^gamma q
    closed_form: float
    gap_top: float  # relative gap at the largest M


def homogenized_check(grid: Grid, fields: FieldSet, gamma: float, M_ladder,
                      options: SpeedOptions = SpeedOptions(), jobs: int = 1,
                      div_tol: float = 1e-10) -> HomogenizedComparison:
    """Compare ``c*_{M A, M^gamma q}(e) / sqrt(M)`` with ``2 sqrt(<e.A e> <zeta>)``."""
    if not 0.0 <= gamma <= 0.5:
        raise PreconditionViolation(f"gamma must lie in [0, 1/2], got {gamma}")
    divAe = divergence_A_e(fields)
    if float(np.max(np.abs(divAe))) > div_tol * max(1.0, float(np.max(fields.eAe))):
        raise PreconditionViolation("div(A e) does not vanish")
    M = check_ladder(M_ladder, "M_ladder", 1)
    closed = 2.0 * math.sqrt(fields.grid.mean(fields.eAe) * fields.zeta_mean)
    drift_on = fields.q_inf > 0

    def one(m):
        scaled = fields.scaled(diffusion=float(m))
        amp = float(m) ** gamma
        if not drift_on:
            # the drift amplitude is irrelevant for q = 0; a unit amplitude keeps the solver scaling
            amp = 1.0
        return minimal_speed(grid, scaled, amp, options).c_star / math.sqrt(m)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            ratios = np.array(list(pool.map(one, M)))
    else:
        ratios = np.array([one(m) for m in M])
    return HomogenizedComparison(float(gamma), M, ratios, closed, float(abs(ratios[-1] - closed) / closed))


# -- consistency report ---------------------------------------------------------------

@dataclass(frozen=True)
class ConsistencyOptions:
    M_ladder: tuple = tuple(2.0**k for k in range(11))
    eps_ladder: tuple = (1.0, 0.5, 0.25, 0.125)
    B_ladder: tuple = (1.0, 2.0, 4.0, 8.0)
    regime_M_ladder: tuple = tuple(2.0**k for k in range(6, 11))
    limit_rel: float = 0.05
    mixed_rel: float = 0.10
    positivity_fraction: float = 0.05
    sigma: float = 3.0
    level_set_K: int = 64
    run_mixed: bool = True


@dataclass
class Check:
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)


@dataclass
class ConsistencyReport:
    eigen_limit: float
    eigen_uncertainty: float
    variational: LimitResult
    verdict: PositivityVerdict
    mixed: dict  # route -> value
    checks: list
    ansatz: str

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def as_dict(self) -> dict:
        return {
            "eigen_limit": {"value": self.eigen_limit, "uncertainty": self.eigen_uncertainty},
            "variational_limit": self.variational.as_dict(),
            "verdict": {"limit_positive": self.verdict.limit_positive,
                        "a": list(self.verdict.a) if self.verdict.a is not None else None,
                        "e_dot_a": self.verdict.e_dot_a},
            "mixed": dict(self.mixed),
            "ansatz": self.ansatz,
            "checks": [{"name": c.name, "passed": c.passed, **c.detail} for c in self.checks],
            "passed": self.passed,
        }


def ansatz_space(grid: Grid, fields: FieldSet, K: int = 64):
    """Exact shear space when the drift is a shear, level-set space otherwise."""
    try:
        return build_shear_space(grid, fields)
    except NotShear:
        stream = solve_stream(grid, fields)
        return build_level_set_space(stream, classify_trajectories(stream), K=K, fields=fields)


def _agree(a: float, b: float, rel: float, floor: float) -> bool:
    return abs(a - b) <= max(rel * max(abs(a), abs(b)), floor)


def consistency_report(grid: Grid, fields: FieldSet, e=None, options: ConsistencyOptions = ConsistencyOptions(),
                       speed_options: SpeedOptions = SpeedOptions(), jobs: int = 1) -> ConsistencyReport:
    """Run every route on one field and compare.

    A limit counts as positive when its lower end exceeds
    ``positivity_fraction`` times the largest ratio seen on the drift ladder;
    the eigen lower end is ``c_inf - sigma * uncertainty``.  Near-zero limits
    are compared with that threshold as an absolute floor.
    """
    if e is not None:
        fields = fields.with_direction(e)
    stream = solve_stream(grid, fields)
    report = classify_trajectories(stream)
    verdict = positivity_criterion(report, fields.e)
    space = ansatz_space(grid, fields, options.level_set_K)

    with ThreadPoolExecutor(max_workers=2) as pool:
        curve_f = pool.submit(drift_sweep, grid, fields, options.M_ladder, speed_options, jobs)
        var_f = pool.submit(large_drift_limit, space)
        curve, var = curve_f.result(), var_f.result()
    threshold = options.positivity_fraction * float(np.max(curve.ratios))
    c_inf, sig = curve.limit.value, curve.limit.uncertainty
    eigen_positive = c_inf - options.sigma * sig > threshold
    var_positive = var.bracket_lo > threshold
    checks = [
        Check("limits_agree",
              _agree(c_inf, var.limit, options.limit_rel,
                     max(var.bracket_hi - var.bracket_lo, options.sigma * sig,
                         0.0 if eigen_positive or var_positive else threshold)),
              {"eigen": c_inf, "variational": var.limit, "tolerance_rel": options.limit_rel}),
        Check("verdict_matches_limits",
              verdict.limit_positive == eigen_positive == var_positive,
              {"verdict": verdict.limit_positive, "eigen_positive": bool(eigen_positive),
               "variational_positive": bool(var_positive), "threshold": threshold}),
    ]
    mixed = {}
    if options.run_mixed:
        eps = small_reaction_sweep(grid, fields, options.eps_ladder, options.regime_M_ladder, speed_options, jobs)
        big = large_diffusion_sweep(grid, fields, options.B_ladder, options.regime_M_ladder, speed_options, jobs)
        mixed = {"eps_sweep": eps.outer.value, "B_sweep": big.outer.value, "variational": mixed_limit(space)}
        floor = 0.0 if verdict.limit_positive else threshold
        names = list(mixed)
        ok = all(_agree(mixed[a], mixed[b], options.mixed_rel, floor)
                 for i, a in enumerate(names) for b in names[i + 1:])
        checks.append(Check("mixed_limits_agree", ok, {**mixed, "tolerance_rel": options.mixed_rel}))
    return ConsistencyReport(c_inf, sig, var, verdict, mixed, checks, space.kind)
