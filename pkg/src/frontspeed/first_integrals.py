"""Finite ansatz spaces of first integrals and the variational limits.

For a space spanned by ``w_1..w_n`` with quadratic forms

    mass      int w_i w_j            growth  int zeta w_i w_j
    stiffness int grad w_i.A grad w_j drift   int (q.e) w_i w_j

``g(lam)`` is the top eigenvalue of the pencil ``(growth - stiffness + lam drift, mass)``
and ``h(lam) = g(lam) / lam``.  Every value is a lower bound for the continuum
supremum over all first integrals.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sl

from . import spectral
from .errors import (DegenerateRegion, InvalidSpec, NotFirstIntegral, NotShear, SingularMass,
                     SingularStiffness)
from .fields import FieldSet, drift_vector
from .speed import golden_section
from .topology import (MAXIMUM, MINIMUM, REGULAR, StreamFunction, TrajectoryReport,
                       critical_nodes, critical_values, periodic_components)

log = logging.getLogger(__name__)

SHEAR_EXACT = "shear_exact"
LEVEL_SET = "level_set"
CONVEX_DECREASING = "convex_decreasing"
INTERIOR_MIN = "interior_min"


@dataclass(eq=False)
class AnsatzSpace:
    kind: str
    fields: FieldSet
    basis: np.ndarray  # (n, nx, n_rows) grid values
    mass: np.ndarray
    stiffness: np.ndarray
    growth: np.ndarray
    drift: np.ndarray  # int (q.e) w_i w_j
    drift_x: np.ndarray  # int q1 w_i w_j
    drift_y: np.ndarray  # int q2 w_i w_j
    drift_linear: np.ndarray  # int (q.e) w_i
    gradients: Optional[tuple] = None  # (gx, gy) of each basis function
    regions: list = field(default_factory=list)
    skipped: list = field(default_factory=list)

    @property
    def dim(self) -> int:
        return self.mass.shape[0]

    def function(self, coeffs) -> np.ndarray:
        return np.tensordot(np.asarray(coeffs, dtype=float), self.basis, axes=1)

    def with_diffusion_scale(self, factor: float) -> "AnsatzSpace":
        """Same space for ``factor * A``: only the stiffness form changes."""
        out = AnsatzSpace(**{k: getattr(self, k) for k in self.__dataclass_fields__})
        out.stiffness = self.stiffness * factor
        out.fields = self.fields.scaled(diffusion=factor)
        return out

    def first_integral_residuals(self) -> np.ndarray:
        """``|q.grad w_k|_{L2} / |w_k|_{H1}`` for every basis function."""
        g = self.fields.grid
        out = np.zeros(self.dim)
        for k in range(self.dim):
            gx, gy = (self.gradients[0][k], self.gradients[1][k]) if self.gradients else \
                spectral.gradient(g, self.basis[k])
            qg = self.fields.q1 * gx + self.fields.q2 * gy
            h1 = math.sqrt(g.integrate(self.basis[k] ** 2 + gx**2 + gy**2))
            out[k] = math.sqrt(g.integrate(qg**2)) / h1 if h1 > 0 else 0.0
        return out


# -- shear space ----------------------------------------------------------------

def build_shear_space(grid, fields: FieldSet, tol: float = 1e-10) -> AnsatzSpace:
    """Nodal hats in ``y`` with forms matching the finite-difference operator.

    Mass, growth and drift are lumped row sums; the stiffness is the
    second-difference form with ``A22`` averaged at half rows.
    """
    g = fields.grid
    scale = max(fields.q_inf, 1e-300)
    xvar = float(np.max(np.ptp(fields.q1, axis=0)))
    if float(np.max(np.abs(fields.q2))) > tol * scale or xvar > tol * scale:
        raise NotShear(f"drift depends on x or has a y-component (deviation {max(xvar, np.abs(fields.q2).max()):.3g})")
    nr = g.n_rows
    W = g.weights
    row = lambda v: np.sum(W * v, axis=0)  # noqa: E731
    mass = np.diag(row(np.ones(g.shape)))
    growth = np.diag(row(fields.zeta))
    drift = np.diag(row(fields.q_dot_e))
    drift_x = np.diag(row(fields.q1))
    drift_y = np.diag(row(fields.q2))
    a22 = fields.A22.mean(axis=0)
    L1 = g.spec.L1
    S = np.zeros((nr, nr))
    faces = range(nr - 1) if g.is_strip else range(nr)
    for j in faces:
        k = (j + 1) % nr
        c = L1 / g.hy * 0.5 * (a22[j] + a22[k])
        S[j, j] += c
        S[k, k] += c
        S[j, k] -= c
        S[k, j] -= c
    basis = np.zeros((nr,) + g.shape)
    gy = np.zeros((nr,) + g.shape)
    for j in range(nr):
        basis[j, :, j] = 1.0
    # one-sided differences of a row indicator; only used for the first-integral check
    for j in range(nr):
        gy[j] = (np.roll(basis[j], -1, axis=1) - basis[j]) / g.hy
    return AnsatzSpace(SHEAR_EXACT, fields, basis, mass, S, growth, drift, drift_x, drift_y,
                       np.diag(drift).copy(), (np.zeros_like(gy), gy))


# -- level-set space ------------------------------------------------------------

@dataclass
class Region:
    label: int
    t_lo: float
    t_hi: float
    edges: np.ndarray
    displacement: np.ndarray  # oriented lattice displacement of its contours per unit level
    n_nodes: int
    rounding_defect: float


def _element_sums(t: np.ndarray, share: np.ndarray, edges: np.ndarray, quantities, tol: float):
    """Sum ``share * quantity`` over the level elements containing ``t``.

    A value sitting on an interior edge is split evenly between the two
    elements it borders, which makes the sums exact for row-aligned levels.
    """
    n_el = len(edges) - 1
    t = np.clip(t, edges[0], edges[-1])
    idx = np.clip(np.searchsorted(edges, t, side="right") - 1, 0, n_el - 1)
    on_edge = np.zeros(t.shape, dtype=bool)
    left = np.zeros_like(idx)
    if n_el > 1:
        nearest = np.searchsorted(edges, t)
        for cand in (nearest - 1, nearest):
            cand = np.clip(cand, 1, n_el - 1)
            hit = (np.abs(t - edges[cand]) <= tol) & ~on_edge
            left = np.where(hit, cand - 1, left)
            on_edge |= hit
    out = []
    for qty in quantities:
        v = share * qty
        sums = np.zeros(n_el)
        np.add.at(sums, idx[~on_edge], v[~on_edge])
        np.add.at(sums, left[on_edge], 0.5 * v[on_edge])
        np.add.at(sums, left[on_edge] + 1, 0.5 * v[on_edge])
        out.append(sums)
    return out


def _hats(t: np.ndarray, edges: np.ndarray):
    """Values and derivatives of all P1 hats on ``edges`` (ends included)."""
    m = len(edges) - 1
    t = np.clip(t, edges[0], edges[-1])
    vals = np.zeros((m + 1,) + t.shape)
    ders = np.zeros((m + 1,) + t.shape)
    e = np.clip(np.searchsorted(edges, t, side="right") - 1, 0, m - 1)
    h = np.diff(edges)[e]
    frac = (t - edges[e]) / h
    for k in range(m + 1):
        up = e == k - 1
        down = e == k
        vals[k] = np.where(up, frac, 0.0) + np.where(down, 1.0 - frac, 0.0)
        ders[k] = np.where(up, 1.0 / h, 0.0) - np.where(down, 1.0 / h, 0.0)
    return vals, ders


class _UnionFind:
    def __init__(self):
        self.parent = {}

    def find(self, a):
        self.parent.setdefault(a, a)
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def _neighbour_labels(grid, labels: np.ndarray):
    """Labels of the four neighbours; strip rows beyond a wall mirror inward."""
    neigh = [np.roll(labels, s, axis=a) for a in (0, 1) for s in (1, -1)]
    if grid.is_strip:
        neigh[2][:, 0] = labels[:, 1]
        neigh[3][:, -1] = labels[:, -2]
    return neigh


def _boundary_shares(grid, labels: np.ndarray, near: np.ndarray):
    """Split each separatrix node evenly among the regions it touches."""
    neigh = _neighbour_labels(grid, labels)
    shares = {}
    for i, j in zip(*np.nonzero(near)):
        labs = {int(nb[i, j]) for nb in neigh} - {0}
        for lab in labs:
            shares.setdefault(lab, []).append((i, j, 1.0 / len(labs)))
    return shares


def _side(level: float, t_lo: float, t_hi: float) -> int:
    return 0 if abs(level - t_lo) <= abs(level - t_hi) else 1


def _separatrix_groups(grid, phi, labels, ends_of, boundary):
    """Join region ends that meet across the same separatrix level.

    Ends are keyed ``(label, side)`` with side 0 at the low level.  Two ends
    are joined when neighbouring nodes of the two regions straddle their common
    level, or when a node on the separatrix touches both regions.
    """
    uf = _UnionFind()
    for lab in ends_of:
        uf.find((lab, 0))
        uf.find((lab, 1))
    axes = (0,) if grid.is_strip else (0, 1)
    pairs = set()
    for axis in (0, 1):
        other = np.roll(labels, -1, axis=axis)
        mid = 0.5 * (phi + np.roll(phi, -1, axis=axis))
        cross = (labels > 0) & (other > 0) & (labels != other)
        if axis not in axes:
            cross[:, -1] = False
        for a, b, t in zip(labels[cross], other[cross], mid[cross]):
            if a in ends_of and b in ends_of:
                pairs.add((int(a), _side(t, *ends_of[a]), int(b), _side(t, *ends_of[b])))
    for a, sa, b, sb in pairs:
        if ends_of[a][sa] == ends_of[b][sb]:
            uf.union((a, sa), (b, sb))
    touching = {}
    for lab, items in boundary.items():
        if lab not in ends_of:
            continue
        for i, j, _ in items:
            touching.setdefault((i, j), []).append((lab, _side(phi[i, j], *ends_of[lab])))
    for keys in touching.values():
        for k in keys[1:]:
            uf.union(keys[0], k)
    return uf


def _grid_stiffness(grid, fields: FieldSet, basis: np.ndarray) -> np.ndarray:
    """Finite-difference Dirichlet form of grid functions, as the operator sees them.

    Edge differences with ``A11``/``A22`` averaged to edge midpoints, plus the
    mixed term from centred differences at nodes.
    """
    n = basis.shape[0]
    flat = lambda a: a.reshape(n, -1)  # noqa: E731
    cell = grid.hx * grid.hy
    dx = (np.roll(basis, -1, axis=1) - basis) / grid.hx
    a11 = 0.5 * (fields.A11 + np.roll(fields.A11, -1, axis=0))
    S = (flat(dx) * (cell * a11).ravel()) @ flat(dx).T
    if grid.is_strip:
        dy = np.diff(basis, axis=2) / grid.hy
        a22 = 0.5 * (fields.A22[:, 1:] + fields.A22[:, :-1])
    else:
        dy = (np.roll(basis, -1, axis=2) - basis) / grid.hy
        a22 = 0.5 * (fields.A22 + np.roll(fields.A22, -1, axis=1))
    S += (flat(dy) * (cell * a22).ravel()) @ flat(dy).T
    if np.any(fields.A12):
        cx = (np.roll(basis, -1, axis=1) - np.roll(basis, 1, axis=1)) / (2 * grid.hx)
        if grid.is_strip:
            ext = np.concatenate([basis[:, :, 1:2], basis, basis[:, :, -2:-1]], axis=2)
            cy = (ext[:, :, 2:] - ext[:, :, :-2]) / (2 * grid.hy)
        else:
            cy = (np.roll(basis, -1, axis=2) - np.roll(basis, 1, axis=2)) / (2 * grid.hy)
        cross = (flat(cx) * (grid.weights * fields.A12).ravel()) @ flat(cy).T
        S += cross + cross.T
    return 0.5 * (S + S.T)


def build_level_set_space(stream: StreamFunction, report: Optional[TrajectoryReport] = None,
                          K: int = 64, fields: Optional[FieldSet] = None,
                          flat_rel: float = 1e-9) -> AnsatzSpace:
    """Piecewise-linear functions of ``phi`` on each region between separatrices.

    Regions are the periodic connected components of nodes whose ``phi`` lies
    strictly between consecutive critical values.  Each carries ``K - 1``
    interior hats in the level value on ``K`` equal-measure elements; elements
    that tied node values make empty are merged away.  A global constant is
    always present.  For ``K >= 2`` every separatrix level also carries one
    hat shared by all regions meeting there, so the space holds every
    continuous piecewise-linear function of ``phi``; one such hat is dropped
    when the constant makes the set dependent.

    Mass and growth reduce to one-dimensional P1 forms in the level value
    whose element coefficients are grid sums over the band between two
    levels.  The stiffness is the finite-difference Dirichlet form of the
    basis grid functions.  Drift forms use the co-area
    identity: on a region whose contours advance by the lattice vector ``d``
    per loop, ``int q eta(phi) = d int eta(t) dt``.
    """
    fields = fields if fields is not None else stream.fields
    g = stream.grid
    phi = stream.phi
    rng = max(float(np.ptp(phi)), 1e-300)
    if K < 1:
        raise InvalidSpec("K must be at least 1")
    kind = critical_nodes(g, phi, flat_rel)
    saddle_like = np.where((kind == MAXIMUM) | (kind == MINIMUM), REGULAR, kind)
    seps = critical_values(phi, saddle_like, flat_rel * rng)
    ends = np.concatenate([[phi.min()], seps, [phi.max()]])
    ends = ends[np.concatenate([[True], np.diff(ends) > flat_rel * rng])]
    tie = 1e-12 * rng + flat_rel * rng
    near = np.zeros(phi.shape, dtype=bool)
    if seps.size:
        idx = np.searchsorted(seps, phi)
        lo = np.abs(phi - seps[np.clip(idx - 1, 0, seps.size - 1)])
        hi = np.abs(phi - seps[np.clip(idx, 0, seps.size - 1)])
        near = np.minimum(lo, hi) <= tie
    band = np.searchsorted(ends, phi)
    labels = np.zeros(phi.shape, dtype=int)
    nlab = 0
    for b in np.unique(band[~near]):
        lab, n = periodic_components(g, (band == b) & ~near)
        labels[lab > 0] = lab[lab > 0] + nlab
        nlab += n
    boundary = _boundary_shares(g, labels, near)

    W = g.weights
    L = np.array([g.spec.L1, g.spec.L2])

    regions, skipped, local = [], [], []
    for lab in range(1, nlab + 1):
        mask = labels == lab
        vals = phi[mask]
        b = int(np.median(band[mask]))
        t_lo, t_hi = float(ends[b - 1]), float(ends[b])
        try:
            if t_hi - t_lo <= flat_rel * rng * 10 or mask.sum() < 2:
                raise DegenerateRegion(f"region {lab}: level range {t_hi - t_lo:.3g} below resolution")
            inner = np.quantile(vals, np.arange(1, K) / K, method="nearest") if K > 1 else np.array([])
            edges = np.concatenate([[t_lo], inner, [t_hi]])
            # tied node values (e.g. rows of a shear) collapse some elements
            edges = edges[np.concatenate([[True], np.diff(edges) > flat_rel * rng])]
            edges[-1] = t_hi
            if len(edges) < 2:
                raise DegenerateRegion(f"region {lab}: no element fits")
        except DegenerateRegion as exc:
            log.info("skipping %s", exc)
            skipped.append(str(exc))
            continue
        flux = np.array([g.integrate(np.where(mask, fields.q1, 0.0)),
                         g.integrate(np.where(mask, fields.q2, 0.0))]) / (t_hi - t_lo)
        steps = np.round(flux / L)
        defect = float(np.max(np.abs(flux / L - steps)))
        disp = steps * L
        regions.append(Region(lab, t_lo, t_hi, edges, disp, int(mask.sum()), defect))
        extra = boundary.get(lab, [])
        ii, jj = np.nonzero(mask)
        ii = np.concatenate([ii, np.array([e[0] for e in extra], dtype=int)])
        jj = np.concatenate([jj, np.array([e[1] for e in extra], dtype=int)])
        share = np.concatenate([np.ones(int(mask.sum())), [e[2] for e in extra]]) * W[ii, jj]
        sums = _element_sums(phi[ii, jj], share, edges,
                             (np.ones(ii.size), fields.zeta[ii, jj]), tie)
        local.append((lab, mask, edges, disp, sums, [(e[0], e[1]) for e in extra]))

    # global numbering: 0 is the constant, then interior hats, then separatrix hats
    with_ends = K >= 2
    ends_of = {r.label: (r.t_lo, r.t_hi) for r in regions}
    uf = _separatrix_groups(g, phi, labels, ends_of, boundary) if with_ends else None
    n = 1
    numbering = []
    for lab, mask, edges, disp, (area, _), _ in local:
        m = len(edges) - 1
        ids = -np.ones(m + 1, dtype=int)
        for k in range(1, m):
            if area[k - 1] + area[k] > 0:  # hats over empty bands are dropped
                ids[k] = n
                n += 1
        numbering.append(ids)
    group_id = {}
    if with_ends:
        for (lab, mask, edges, disp, (area, _), _), ids in zip(local, numbering):
            for side, k, a in ((0, 0, area[0]), (1, len(edges) - 1, area[-1])):
                if a <= 0:
                    continue
                root = uf.find((lab, side))
                if root not in group_id:
                    group_id[root] = n
                    n += 1
                ids[k] = group_id[root]

    basis = np.zeros((n,) + g.shape)
    dbasis = np.zeros((n,) + g.shape)
    basis[0] = 1.0
    mass, growth = np.zeros((n, n)), np.zeros((n, n))
    drift_vec = np.zeros((2, n, n))
    lin_vec = np.zeros((2, n))
    mass[0, 0] = g.measure
    growth[0, 0] = g.integrate(fields.zeta)
    drift_vec[:, 0, 0] = [g.integrate(fields.q1), g.integrate(fields.q2)]
    P1 = np.array([[1 / 3, 1 / 6], [1 / 6, 1 / 3]])
    for (lab, mask, edges, disp, (area, grow), seam), ids in zip(local, numbering):
        v, d = _hats(phi, edges)
        for k in np.flatnonzero(ids >= 0):
            basis[ids[k]] += v[k] * mask
            dbasis[ids[k]] += d[k] * mask
        for side, k in ((0, 0), (1, len(edges) - 1)):
            if ids[k] >= 0:
                for i, j in seam:
                    if _side(phi[i, j], *ends_of[lab]) == side:
                        basis[ids[k], i, j] = 1.0
        h = np.diff(edges)
        for e in range(len(h)):
            pair = ids[e:e + 2]
            ok = pair >= 0
            p = pair[ok]
            sub = np.ix_(p, p)
            blk = np.ix_(ok, ok)
            mass[sub] += area[e] * P1[blk]
            growth[sub] += grow[e] * P1[blk]
            mass[0, p] += 0.5 * area[e]
            growth[0, p] += 0.5 * grow[e]
            for c in range(2):
                drift_vec[c][sub] += disp[c] * h[e] * P1[blk]
                lin_vec[c][p] += 0.5 * disp[c] * h[e]
    mass[1:, 0] = mass[0, 1:]
    growth[1:, 0] = growth[0, 1:]
    for c in range(2):
        drift_vec[c][0, 1:] = drift_vec[c][1:, 0] = lin_vec[c][1:]
    stiff = _grid_stiffness(g, fields, basis)

    if group_id:
        # the constant equals the sum of all hats when the regions cover the cell
        keep = np.ones(n, dtype=bool)
        dscale = np.sqrt(np.diag(mass))
        if np.linalg.eigvalsh(mass / np.outer(dscale, dscale))[0] < 1e-10:
            keep[max(group_id.values())] = False
        sel = np.flatnonzero(keep)
        sub = np.ix_(sel, sel)
        mass, growth, stiff = mass[sub], growth[sub], stiff[sub]
        drift_vec = drift_vec[:, sel][:, :, sel]
        lin_vec = lin_vec[:, sel]
        basis, dbasis = basis[sel], dbasis[sel]
    et = fields.e_tilde
    drift = et[0] * drift_vec[0] + et[1] * drift_vec[1]
    linear = et[0] * lin_vec[0] + et[1] * lin_vec[1]
    gx = dbasis * stream.phi_x
    gy = dbasis * stream.phi_y
    if report is not None and report.a is not None:
        a = np.asarray(report.a)
        for r in regions:
            if np.any(r.displacement) and abs(a[0] * r.displacement[1] - a[1] * r.displacement[0]) > 1e-9:
                log.warning("region %d advances by %s, not along %s", r.label, r.displacement, a)
    return AnsatzSpace(LEVEL_SET, fields, basis, mass, stiff, growth, drift, drift_vec[0],
                       drift_vec[1], linear, (gx, gy), regions, skipped)


# -- g and h --------------------------------------------------------------------

@dataclass
class GValue:
    lam: float
    g: float
    coeffs: np.ndarray
    drift_quotient: float


def _pencil(space: AnsatzSpace, lam: float):
    A = space.growth - space.stiffness + lam * space.drift
    return 0.5 * (A + A.T), 0.5 * (space.mass + space.mass.T)


def g_of_lambda(space: AnsatzSpace, lam: float, tie_rel: float = 1e-10) -> GValue:
    """Top eigenpair of ``(growth - stiffness + lam drift, mass)``.

    When the top eigenvalue is multiple, the returned maximiser is the one
    with the largest drift quotient inside the top eigenspace.
    """
    if lam < 0:
        raise InvalidSpec("lambda must be nonnegative")
    A, B = _pencil(space, lam)
    try:
        vals, vecs = sl.eigh(A, B)
    except np.linalg.LinAlgError as exc:
        raise SingularMass(f"mass form is not positive definite: {exc}") from exc
    top = vals[-1]
    tie = vals >= top - tie_rel * max(1.0, abs(top))
    V = vecs[:, tie]
    if V.shape[1] > 1:
        dq, dv = sl.eigh(V.T @ space.drift @ V, V.T @ B @ V)
        x = V @ dv[:, -1]
    else:
        x = V[:, 0]
    x = x / math.sqrt(float(x @ B @ x))
    return GValue(float(lam), float(top), x, float(x @ space.drift @ x))


def max_drift_quotient(space: AnsatzSpace) -> float:
    """Largest ``int (q.e) w^2 / int w^2`` over the space."""
    _, B = _pencil(space, 0.0)
    return float(sl.eigh(0.5 * (space.drift + space.drift.T), B, eigvals_only=True)[-1])


@dataclass
class HLambdaProfile:
    lam: np.ndarray
    g: np.ndarray
    h: np.ndarray
    case: str
    inf_h: float
    bracket: tuple
    lambda0: Optional[float]
    max_drift_quotient: float
    zeta_inf: float
    zeta_mean: float
    checks: dict

    def rows(self):
        for a, b, c in zip(self.lam, self.g, self.h):
            yield float(a), float(b), float(c)


def default_lambda_grid(fields: FieldSet, points: int = 64) -> np.ndarray:
    zm = fields.zeta_mean
    centre = math.sqrt(zm) * max(1.0, fields.q_dot_e_inf / zm)
    return np.logspace(math.log10(centre) - 2, math.log10(centre) + 4, points)


def check_lambda_grid(lam: np.ndarray) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    if lam.ndim != 1 or lam.size < 16:
        raise InvalidSpec("lambda grid needs at least 16 points")
    if np.any(lam <= 0) or np.any(np.diff(lam) <= 0):
        raise InvalidSpec("lambda grid must be positive and increasing")
    if lam[-1] / lam[0] < 1e3 * (1 - 1e-12):
        raise InvalidSpec("lambda grid must span at least 3 decades")
    r = np.diff(np.log(lam))
    if np.ptp(r) > 1e-6 * r.mean():
        raise InvalidSpec("lambda grid must be log-spaced")
    return lam


def convexity_defect(x: np.ndarray, y: np.ndarray) -> float:
    """Most negative change of consecutive slopes; zero or positive for convex data."""
    s = np.diff(y) / np.diff(x)
    return float(np.min(np.diff(s))) if s.size > 1 else 0.0


def h_profile(space: AnsatzSpace, lambda_grid=None, refine_rel: float = 1e-7) -> HLambdaProfile:
    fields = space.fields
    lam = check_lambda_grid(default_lambda_grid(fields) if lambda_grid is None else lambda_grid)
    gs = np.array([g_of_lambda(space, float(x)).g for x in lam])
    hs = gs / lam
    zeta_inf, zeta_mean = fields.zeta_inf, fields.zeta_mean
    mdq = max_drift_quotient(space)
    interior = [k for k in range(1, len(lam) - 1) if hs[k] < hs[k - 1] and hs[k] < hs[k + 1]]
    scale = max(1.0, float(np.max(np.abs(gs))))
    if interior:
        k = min(interior, key=lambda i: hs[i])
        hfun = lambda x: g_of_lambda(space, x).g / x  # noqa: E731
        lam0, h0 = golden_section(hfun, float(lam[k - 1]), float(lam[k + 1]), refine_rel, b=float(lam[k]))
        tol = 1e-8 * max(1.0, abs(h0))
        case, inf_h, bracket = INTERIOR_MIN, h0, (h0 - tol, h0)
    else:
        lam0 = None
        lmax = float(lam[-1])
        case = CONVEX_DECREASING
        bracket = (float(hs[-1]) - zeta_inf / lmax, float(hs[-1]))
        inf_h = min(max(mdq, bracket[0]), bracket[1])
    checks = {
        "g_above_mean_zeta": bool(np.all(gs >= zeta_mean - 1e-10 * scale)),
        "h_positive": bool(np.all(hs > 0)),
        "g_convex": convexity_defect(lam, gs) >= -1e-8 * scale,
        "upper_sandwich": bool(np.all(hs <= zeta_inf / lam + mdq + 1e-10 * scale / lam)),
        "lower_sandwich": bool(np.all(hs >= bracket[0] - 1e-10 * scale)),
    }
    return HLambdaProfile(lam, gs, hs, case, float(inf_h), (float(bracket[0]), float(bracket[1])),
                          lam0, mdq, zeta_inf, zeta_mean, checks)


@dataclass
class LimitResult:
    limit: float
    bracket_lo: float
    bracket_hi: float
    case: str
    lambda0: Optional[float] = None

    def as_dict(self) -> dict:
        return {"limit": self.limit, "bracket_lo": self.bracket_lo, "bracket_hi": self.bracket_hi,
                "case": self.case}


def large_drift_limit(space_or_profile) -> LimitResult:
    """``inf_lam h(lam)`` over the ansatz with its certified bracket."""
    prof = space_or_profile if isinstance(space_or_profile, HLambdaProfile) else h_profile(space_or_profile)
    return LimitResult(prof.inf_h, prof.bracket[0], prof.bracket[1], prof.case, prof.lambda0)


def mixed_limit(space: AnsatzSpace, fields: Optional[FieldSet] = None) -> float:
    """``(2 sqrt(int zeta) / |C|) * max_w int (q.e) w / sqrt(int grad w.A grad w)``.

    The maximum of a linear functional over the stiffness ellipsoid is
    ``sqrt(b^T S^+ b)``; ``b`` must vanish on the null space of ``S`` (constants).
    """
    fields = fields if fields is not None else space.fields
    S = 0.5 * (space.stiffness + space.stiffness.T)
    b = space.drift_linear
    if space.dim < 2 or not np.any(np.abs(S) > 0):
        raise SingularStiffness("no nonconstant function in the space")
    vals, vecs = sl.eigh(S)
    cut = 1e-10 * vals[-1]
    keep = vals > cut
    null_part = vecs[:, ~keep].T @ b
    if np.any(np.abs(null_part) > 1e-8 * max(np.linalg.norm(b), 1e-300)):
        raise SingularStiffness("drift functional does not vanish on stiffness-free functions")
    proj = vecs[:, keep].T @ b
    quad = float(np.sum(proj**2 / vals[keep]))
    g = fields.grid
    return 2.0 * math.sqrt(g.integrate(fields.zeta)) / g.measure * math.sqrt(max(quad, 0.0))


# -- drift term -----------------------------------------------------------------

@dataclass
class DriftTerm:
    vector: np.ndarray
    along_e: float
    first_integral_residual: float


def drift_term(fields: FieldSet, w: np.ndarray, grad: Optional[tuple] = None,
               tol: float = 1e-6) -> DriftTerm:
    """``int q w^2`` and ``int (q.e) w^2`` by grid quadrature.

    Raises ``NotFirstIntegral`` when ``|q.grad w|_{L2} > tol * |q|_inf * |w|_{H1}``.
    The gradient is spectral unless supplied.
    """
    g = fields.grid
    w = np.asarray(w, dtype=float)
    gx, gy = grad if grad is not None else spectral.gradient(g, w)
    h1 = math.sqrt(g.integrate(w * w + gx * gx + gy * gy))
    res = math.sqrt(g.integrate((fields.q1 * gx + fields.q2 * gy) ** 2))
    rel = res / (max(fields.q_inf, 1e-300) * h1) if h1 > 0 else 0.0
    if rel > tol:
        raise NotFirstIntegral(f"|q.grad w| / (|q| |w|_H1) = {rel:.3g} exceeds {tol:.3g}")
    vec = drift_vector(fields, w)
    return DriftTerm(vec, float(fields.e_tilde @ vec), rel)


def orthogonal_drift_bound(space: AnsatzSpace, a) -> float:
    """``max_w |n . int q w^2| / int w^2`` with ``n`` normal to ``a``."""
    a = np.asarray(a, dtype=float)
    nvec = np.array([-a[1], a[0]]) / np.hypot(*a)
    Q = nvec[0] * space.drift_x + nvec[1] * space.drift_y
    _, B = _pencil(space, 0.0)
    vals = sl.eigh(0.5 * (Q + Q.T), B, eigvals_only=True)
    return float(np.max(np.abs(vals)))
