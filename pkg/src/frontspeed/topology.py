"""Stream function, periodic contour tracing and the channel criterion.

Conventions: ``R`` rotates by +pi/2 and ``q = perp grad phi = (-phi_y, phi_x)``.
Then ``R q = -grad phi`` and ``phi`` solves ``-lap phi = div(R q)``.

Contours of ``phi`` on the torus are traced with periodic marching squares.
Each closed contour carries the lattice vector it advances by in one loop,
oriented along the flow; a nonzero vector marks a channel of periodic
unbounded trajectories.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import ndimage

from . import spectral
from .errors import NoChannel, NotDivergenceFree, TracingFailure
from .fields import FieldSet, divergence_residual, drift_vector
from .grid import Grid

log = logging.getLogger(__name__)

GRAD_THRESHOLD = 1e-3
DEFAULT_LEVELS = 129
POOL_MARGIN = 4.0
NUDGES = (0.0, 0.5, -0.5, 0.25, -0.25, 0.75, -0.75, 0.125, -0.125, 0.875, -0.875)


@dataclass(frozen=True, eq=False)
class StreamFunction:
    grid: Grid
    phi: np.ndarray
    phi_x: np.ndarray
    phi_y: np.ndarray
    residual: float  # max |q - perp grad phi|
    fields: Optional[FieldSet] = None
    wall_values: tuple = ()
    wall_spread: float = 0.0  # max deviation of phi from its wall constant

    @property
    def grad_norm(self) -> np.ndarray:
        return np.hypot(self.phi_x, self.phi_y)


def _poisson_torus(q1: np.ndarray, q2: np.ndarray, L1: float, L2: float):
    """``phi`` and its spectral gradient on a torus.

    The Laplacian symbol is built from the same Nyquist-free derivative
    factors as the gradient, so ``perp grad`` of the result reproduces every
    resolved mode of ``q`` exactly.
    """
    nx, ny = q1.shape
    kx = spectral._odd_derivative_factor(nx, L1)[:, None]
    ky = spectral._odd_derivative_factor(ny, L2)[None, :]
    k2 = -(kx * kx + ky * ky).real
    rhs = -kx * np.fft.fft2(q2) + ky * np.fft.fft2(q1)
    hat = np.divide(rhs, k2, out=np.zeros_like(rhs), where=k2 > 0)
    phi = np.real(np.fft.ifft2(hat))
    return phi, np.real(np.fft.ifft2(kx * hat)), np.real(np.fft.ifft2(ky * hat))


def stream_from_drift(grid: Grid, q1: np.ndarray, q2: np.ndarray):
    """Mean-zero ``phi`` with ``perp grad phi = q``, and ``(phi_x, phi_y)``.

    On the strip ``q`` is reflected to the doubled torus (``q1`` evenly,
    ``q2`` oddly), solved there and restricted back.
    """
    if not grid.is_strip:
        return _poisson_torus(q1, q2, grid.spec.L1, grid.spec.L2)
    big = _poisson_torus(spectral.reflect(q1, 1), spectral.reflect(q2, -1), grid.spec.L1, 2 * grid.spec.L2)
    phi, gx, gy = (a[:, : grid.n_rows] for a in big)
    return phi - grid.mean(phi), gx, gy


def solve_stream(grid: Grid, fields: FieldSet, div_tol: Optional[float] = None) -> StreamFunction:
    tol = 1e-8 * max(fields.q_inf, 1e-300) if div_tol is None else div_tol
    div = divergence_residual(fields)
    if div > tol:
        raise NotDivergenceFree(f"divergence residual {div:.3g} exceeds {tol:.3g}")
    q1, q2 = np.asarray(fields.q1), np.asarray(fields.q2)
    phi, gx, gy = stream_from_drift(grid, q1, q2)
    residual = float(max(np.max(np.abs(q1 + gy)), np.max(np.abs(q2 - gx))))
    walls, spread = (), 0.0
    if grid.is_strip:
        rows = [phi[:, j] for j in grid.wall_rows()]
        walls = tuple(float(r.mean()) for r in rows)
        spread = float(max(np.ptp(r) for r in rows))
    return StreamFunction(grid, phi, gx, gy, residual, fields, walls, spread)


# -- marching squares -------------------------------------------------------------

@dataclass(frozen=True)
class Contour:
    level: float
    points: np.ndarray  # (k, 2) unwrapped polyline, first point repeated implicitly
    winding: tuple  # oriented along the flow, integer lattice steps
    arclength: float
    orientation: int


@dataclass
class LevelTrace:
    level: float
    regular: bool
    contours: list = field(default_factory=list)
    min_grad: float = math.inf


@dataclass
class Channel:
    t_lo: float
    t_hi: float
    winding: tuple


@dataclass
class TrajectoryReport:
    grid: Grid
    levels: list  # LevelTrace, ordered by level
    channels: list
    a: Optional[tuple]  # period vector (p L1, q L2) or None
    primitive: Optional[tuple]
    has_unbounded_periodic: bool
    shared_primitive: bool
    critical_values: list
    n_requested: int

    @property
    def regular_levels(self) -> list:
        return [lv for lv in self.levels if lv.regular]

    def windings(self) -> list:
        return [c.winding for lv in self.regular_levels for c in lv.contours]


# local edges: 0 bottom, 1 right, 2 top, 3 left; corner bits b0=(i,j) b1=(i+1,j) b2=(i+1,j+1) b3=(i,j+1)
_EDGE_CORNERS = ((0, 1), (1, 2), (3, 2), (0, 3))


def _case_pairs(code: int, centre_above: bool):
    bits = [(code >> k) & 1 for k in range(4)]
    crossing = [e for e, (a, b) in enumerate(_EDGE_CORNERS) if bits[a] != bits[b]]
    if len(crossing) == 2:
        return [tuple(crossing)]
    if len(crossing) != 4:
        return []
    # saddle: isolate the corners that disagree with the centre
    isolate = [k for k in range(4) if bits[k] != centre_above]
    corner_edges = {0: (3, 0), 1: (0, 1), 2: (1, 2), 3: (2, 3)}
    return [corner_edges[k] for k in isolate]


_PAIRS = {(c, s): _case_pairs(c, s) for c in range(16) for s in (False, True)}


class _Tracer:
    """Marching squares for one grid; reused across levels."""

    def __init__(self, grid: Grid, phi: np.ndarray, grad: np.ndarray, q1: np.ndarray, q2: np.ndarray):
        self.g = grid
        self.phi = phi
        self.grad = grad
        self.q1, self.q2 = q1, q2
        nx, nr = grid.nx, grid.n_rows
        self.ncy = grid.ny if not grid.is_strip else grid.ny  # cell rows
        self.nh = nx * nr  # horizontal edge ids first, then vertical

    def _edge_ids(self, i, j):
        nx, nr = self.g.nx, self.g.n_rows
        jw = j if self.g.is_strip else np.mod(j, self.g.ny)
        i1 = np.mod(i + 1, nx)
        j1 = j + 1 if self.g.is_strip else np.mod(j + 1, self.g.ny)
        return (
            i * nr + jw,              # bottom: horizontal edge at (i, j)
            self.nh + i1 * nr + jw,   # right: vertical edge at (i+1, j)
            i * nr + j1,              # top: horizontal edge at (i, j+1)
            self.nh + i * nr + jw,    # left: vertical edge at (i, j)
        )

    def trace(self, t: float, max_steps: int) -> LevelTrace:
        g = self.g
        nx, nr = g.nx, g.n_rows
        above = self.phi >= t
        i, j = np.meshgrid(np.arange(nx), np.arange(self.ncy), indexing="ij")
        i, j = i.ravel(), j.ravel()
        jn = j + 1 if g.is_strip else np.mod(j + 1, g.ny)
        inx = np.mod(i + 1, nx)
        corners = (self.phi[i, j], self.phi[inx, j], self.phi[inx, jn], self.phi[i, jn])
        code = (above[i, j] * 1 + above[inx, j] * 2 + above[inx, jn] * 4 + above[i, jn] * 8).astype(int)
        centre = (sum(corners) / 4.0) >= t
        edges = self._edge_ids(i, j)
        a_list, b_list = [], []
        for (c, s), pairs in _PAIRS.items():
            if not pairs:
                continue
            sel = (code == c) & (centre == s)
            if not sel.any():
                continue
            for e0, e1 in pairs:
                a_list.append(edges[e0][sel])
                b_list.append(edges[e1][sel])
        lv = LevelTrace(float(t), True)
        if not a_list:
            return lv
        a = np.concatenate(a_list)
        b = np.concatenate(b_list)
        ends = np.concatenate([a, b])
        other = np.concatenate([b, a])
        order = np.argsort(ends, kind="stable")
        ends, other = ends[order], other[order]
        uniq, start, counts = np.unique(ends, return_index=True, return_counts=True)
        if np.any(counts != 2):
            raise TracingFailure(f"open contour at level {t:.6g}", level=float(t))
        nbr = {int(e): (int(other[s]), int(other[s + 1])) for e, s in zip(uniq, start)}
        pts, grads, qs = self._edge_points(uniq, t)
        pos = {int(e): k for k, e in enumerate(uniq)}
        lv.min_grad = float(grads.min())
        visited = set()
        L = np.array([g.spec.L1, g.spec.L2])
        for e0 in nbr:
            if e0 in visited:
                continue
            seq = [e0]
            visited.add(e0)
            prev, cur = e0, nbr[e0][0]
            steps = 0
            while cur != e0:
                if steps > max_steps:
                    raise TracingFailure(f"contour did not close at level {t:.6g}", level=float(t))
                seq.append(cur)
                visited.add(cur)
                n0, n1 = nbr[cur]
                prev, cur = cur, (n1 if n0 == prev else n0)
                steps += 1
            idx = np.array([pos[e] for e in seq])
            p = pts[idx]
            d = np.diff(np.vstack([p, p[:1]]), axis=0)
            d -= L * np.round(d / L)
            total = d.sum(axis=0)
            wind = np.round(total / L).astype(int)
            qm = qs[idx]
            flux = float(np.sum(qm * d))
            sign = 1 if flux >= 0 else -1
            unwrapped = p[0] + np.vstack([np.zeros(2), np.cumsum(d, axis=0)[:-1]])
            lv.contours.append(Contour(float(t), unwrapped, (int(sign * wind[0]), int(sign * wind[1])),
                                       float(np.sum(np.hypot(d[:, 0], d[:, 1]))), sign))
        return lv

    def _edge_points(self, ids: np.ndarray, t: float):
        g = self.g
        nx, nr = g.nx, g.n_rows
        vert = ids >= self.nh
        k = np.where(vert, ids - self.nh, ids)
        i, j = k // nr, k % nr
        i2 = np.where(vert, i, np.mod(i + 1, nx))
        j2 = np.where(vert, (j + 1) if g.is_strip else np.mod(j + 1, g.ny), j)
        f1, f2 = self.phi[i, j], self.phi[i2, j2]
        s = (t - f1) / (f2 - f1)
        x = (i + np.where(vert, 0.0, s)) * g.hx
        y = (j + np.where(vert, s, 0.0)) * g.hy
        grads = (1 - s) * self.grad[i, j] + s * self.grad[i2, j2]
        q = np.column_stack([(1 - s) * self.q1[i, j] + s * self.q1[i2, j2],
                             (1 - s) * self.q2[i, j] + s * self.q2[i2, j2]])
        return np.column_stack([x, y]), grads, q


def trace_level(stream: StreamFunction, t: float) -> LevelTrace:
    q1, q2 = -stream.phi_y, stream.phi_x
    tr = _Tracer(stream.grid, stream.phi, stream.grad_norm, q1, q2)
    return tr.trace(t, 4 * stream.grid.size)


def primitive(v) -> tuple:
    """Divide by the gcd and fix the sign so the first nonzero entry is positive."""
    p, q = int(v[0]), int(v[1])
    d = math.gcd(abs(p), abs(q))
    if d == 0:
        return (0, 0)
    p, q = p // d, q // d
    if p < 0 or (p == 0 and q < 0):
        p, q = -p, -q
    return (p, q)


REGULAR, SADDLE, MAXIMUM, MINIMUM, DEGENERATE = range(5)
_RING = ((1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1))


def critical_nodes(grid: Grid, phi: np.ndarray, flat_rel: float = 1e-9) -> np.ndarray:
    """Classify nodes by the signs of ``phi(neighbour) - phi(node)`` around the 8-ring.

    Differences below ``flat_rel * range(phi)`` count as zero.  Four or more
    sign changes make a saddle; a ring of one strict sign an extremum; a ring
    of one sign with some zeros a degenerate (non-isolated) extremum.  Strip
    wall nodes are marked degenerate since the walls are level sets.
    """
    tol = flat_rel * max(float(np.ptp(phi)), 1e-300)
    if grid.is_strip:
        ext = np.concatenate([phi[:, 1:2], phi, phi[:, -2:-1]], axis=1)
    else:
        ext = np.concatenate([phi[:, -1:], phi, phi[:, :1]], axis=1)
    ring = np.stack([np.roll(ext, -di, axis=0)[:, 1 + dj: 1 + dj + grid.n_rows] - phi for di, dj in _RING])
    sgn = np.where(ring > tol, 1, np.where(ring < -tol, -1, 0))
    kind = np.full(phi.shape, REGULAR)
    pos, neg = (sgn > 0).sum(0), (sgn < 0).sum(0)
    zero = 8 - pos - neg
    kind[(pos == 8)] = MINIMUM
    kind[(neg == 8)] = MAXIMUM
    kind[((pos == 0) | (neg == 0)) & (zero > 0)] = DEGENERATE
    # sign changes around the ring, ignoring zeros
    changes = np.zeros(phi.shape, dtype=int)
    last = np.zeros(phi.shape, dtype=int)
    first = np.zeros(phi.shape, dtype=int)
    for k in range(8):
        s = sgn[k]
        nz = s != 0
        changes += (nz & (last != 0) & (s != last))
        first = np.where((first == 0) & nz, s, first)
        last = np.where(nz, s, last)
    changes += (first != 0) & (last != 0) & (first != last)
    kind[(changes >= 4) & (kind == REGULAR)] = SADDLE
    if grid.is_strip:
        kind[:, list(grid.wall_rows())] = DEGENERATE
    return kind


def critical_values(phi: np.ndarray, kind: np.ndarray, merge_tol: float) -> np.ndarray:
    """Sorted distinct values of ``phi`` at non-regular nodes, merged within ``merge_tol``."""
    vals = np.sort(phi[kind != REGULAR])
    if vals.size == 0:
        return vals
    keep = np.concatenate([[True], np.diff(vals) > merge_tol])
    return vals[keep]


def regular_levels(stream: StreamFunction, m: int, grad_threshold: float = GRAD_THRESHOLD,
                   flat_rel: float = 1e-9) -> np.ndarray:
    """``m`` equi-quantile levels of ``phi`` over nodes with non-negligible gradient,
    kept away from the values at critical nodes."""
    phi = stream.phi
    gn = stream.grad_norm
    # sample values from nodes with a margin above the regularity threshold
    live = gn >= POOL_MARGIN * grad_threshold * gn.max()
    kind = critical_nodes(stream.grid, phi, flat_rel)
    merge = flat_rel * max(float(np.ptp(phi)), 1e-300)
    pool = phi[live & (kind == REGULAR)]
    if pool.size == 0:
        pool = phi.ravel()
    pool = critical_values(pool, np.ones(pool.shape, dtype=int), merge)  # distinct values
    levels = np.quantile(pool, np.arange(1, m + 1) / (m + 1))
    crit = critical_values(phi, kind, merge)
    if crit.size:
        gap = np.min(np.abs(levels[:, None] - crit[None, :]), axis=1)
        tiny = gap < flat_rel * max(float(np.ptp(phi)), 1e-300)
        # nudge a level sitting on a critical value half way to its neighbour
        for k in np.flatnonzero(tiny):
            nb = levels[k + 1] if k + 1 < m else levels[k - 1]
            levels[k] = 0.5 * (levels[k] + nb)
    return np.sort(levels)


def classify_trajectories(stream: StreamFunction, m: int = DEFAULT_LEVELS,
                          levels: Optional[np.ndarray] = None,
                          grad_threshold: float = GRAD_THRESHOLD) -> TrajectoryReport:
    """Trace ``m`` levels and collect windings and channels.

    A level is regular when the interpolated ``|grad phi|`` on every contour
    point is at least ``grad_threshold * max |grad phi|``.  A default level
    that fails is recorded as critical and replaced by a regular level from
    the same quantile gap when one of a few trial values qualifies; explicit
    ``levels`` are never moved.
    """
    g = stream.grid
    ts = regular_levels(stream, m, grad_threshold) if levels is None else np.sort(np.asarray(levels, float))
    gmax = float(stream.grad_norm.max())
    q1, q2 = -stream.phi_y, stream.phi_x
    tracer = _Tracer(g, stream.phi, stream.grad_norm, q1, q2)
    traces, critical = [], []
    bounds = np.concatenate([[stream.phi.min()], ts, [stream.phi.max()]])
    for k, t in enumerate(ts):
        lv = None
        # a critical sample is replaced by a nearby level inside its quantile gap
        for frac in NUDGES:
            nb = bounds[k + 2] if frac > 0 else bounds[k]
            cand = float(t + abs(frac) * (nb - t))
            trial = tracer.trace(cand, 4 * g.size)
            if trial.contours and trial.min_grad >= grad_threshold * gmax:
                lv = trial
                break
            if frac == 0.0:
                critical.append(float(t))
            if levels is not None:
                break
        if lv is None:
            lv = LevelTrace(float(t), False)
        traces.append(lv)
    traces.sort(key=lambda lv: lv.level)

    prims = set()
    for lv in traces:
        if lv.regular:
            for c in lv.contours:
                if c.winding != (0, 0):
                    prims.add(primitive(c.winding))
    shared = len(prims) <= 1
    prim = sorted(prims)[0] if prims else None

    channels, run = [], None
    for lv in traces:
        nz = [c for c in lv.contours if c.winding != (0, 0)] if lv.regular else []
        if nz:
            w = primitive(nz[0].winding)
            if run is not None and run.winding == w:
                run.t_hi = lv.level
            else:
                run = Channel(lv.level, lv.level, w)
                channels.append(run)
        else:
            run = None
    a = (prim[0] * g.spec.L1, prim[1] * g.spec.L2) if prim else None
    if g.is_strip and prim is not None and prim != (1, 0):
        shared = False
    return TrajectoryReport(g, traces, channels, a, prim, bool(prims), shared, critical, len(ts))


# -- verdict and witness ------------------------------------------------------------

@dataclass(frozen=True)
class PositivityVerdict:
    limit_positive: bool
    a: Optional[tuple]
    e_dot_a: float


def positivity_criterion(report: TrajectoryReport, e) -> PositivityVerdict:
    from .fields import embed_direction
    et = embed_direction(e, report.grid.spec.d)
    if report.a is None:
        return PositivityVerdict(False, None, 0.0)
    ea = float(et @ np.asarray(report.a))
    return PositivityVerdict(abs(ea) > 1e-12 * float(np.hypot(*report.a)), report.a, ea)


@dataclass
class ChannelWitness:
    w: np.ndarray
    drift: np.ndarray  # (int q1 w^2, int q2 w^2)
    region: np.ndarray  # boolean mask of the chosen component
    band: tuple  # (t1, t2) support of the bump in level values
    centre: float

    def eta(self, t):
        return bump(t, self.centre, 0.5 * (self.band[1] - self.band[0]))


def bump(t, centre: float, half_width: float):
    """Smooth bump ``exp(1 - 1/(1 - s^2))`` with ``s = (t - centre)/half_width``."""
    s = (np.asarray(t, dtype=float) - centre) / half_width
    out = np.zeros_like(s)
    inside = np.abs(s) < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))
    return out


def periodic_components(grid: Grid, mask: np.ndarray):
    """4-connected components of ``mask`` with the cell's periodic wraps."""
    labels, n = ndimage.label(mask)
    parent = list(range(n + 1))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def join(u, v):
        for a, b in zip(u, v):
            if a and b:
                ra, rb = find(a), find(b)
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)

    join(labels[0, :], labels[-1, :])
    if not grid.is_strip:
        join(labels[:, 0], labels[:, -1])
    roots = np.array([find(a) for a in range(n + 1)])
    uniq = np.unique(roots[1:]) if n else np.array([], dtype=int)
    remap = np.zeros(n + 1, dtype=int)
    for new, r in enumerate(uniq, 1):
        remap[roots == r] = new
    remap[0] = 0
    return remap[labels], len(uniq)


def channel_witness(report: TrajectoryReport, stream: StreamFunction, fields: Optional[FieldSet] = None,
                    width: float = 0.25) -> ChannelWitness:
    """Bump of ``phi`` inside the widest channel band, restricted to one component."""
    if not report.has_unbounded_periodic or not report.channels:
        raise NoChannel("no level with a nonzero winding")
    fields = fields if fields is not None else stream.fields
    ch = max(report.channels, key=lambda c: (c.t_hi - c.t_lo, -c.t_lo))
    centre = 0.5 * (ch.t_lo + ch.t_hi)
    half = width * (ch.t_hi - ch.t_lo)
    if not half > 0:
        raise NoChannel("channel band is a single level")
    eta = bump(stream.phi, centre, half)
    labels, n = periodic_components(stream.grid, eta > 0)
    if n == 0:
        raise NoChannel("empty channel band")
    sizes = ndimage.sum(np.ones_like(eta), labels, index=np.arange(1, n + 1))
    pick = 1 + int(np.argmax(sizes))
    region = labels == pick
    w = np.where(region, eta, 0.0)
    drift = drift_vector(fields, w)
    return ChannelWitness(w, drift, region, (centre - half, centre + half), centre)


CONTOUR_COLUMNS = ("level", "component", "k", "x", "y")


def contour_rows(report: TrajectoryReport):
    for lv in report.levels:
        for ci, c in enumerate(lv.contours):
            for k, (x, y) in enumerate(c.points):
                yield (lv.level, ci, k, float(x), float(y))
