"""Sampled coefficient fields and their hypothesis checks.

A ``FieldDefs`` holds closures of position; ``sample_fields`` evaluates them on
a grid into an immutable ``FieldSet``.  Drift is either given directly or
derived from a stream function with the convention
``q = (-d phi/dy, d phi/dx)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable, Optional

import numpy as np

from . import spectral
from .errors import EvaluationFailure, InvalidSpec
from .grid import Grid

Closure = Callable[[np.ndarray, np.ndarray], object]


def kpp_reaction(zeta: Closure):
    """``f(x, y, u) = zeta(x, y) u (1 - u)``."""
    def f(x, y, u):
        return np.asarray(zeta(x, y)) * u * (1.0 - u)
    return f


@dataclass(frozen=True)
class FieldDefs:
    """Analytic field definitions.

    ``diffusion`` returns ``(A11, A12, A22)``, ``drift`` returns ``(q1, q2)``.
    When ``drift`` is None the drift is the perpendicular gradient of
    ``stream`` (computed spectrally, torus only).
    """
    diffusion: Closure
    zeta: Closure
    drift: Optional[Closure] = None
    stream: Optional[Closure] = None
    reaction: Optional[Callable] = None
    e: tuple = (1.0, 0.0)
    name: str = "custom"


def _broadcast(value, shape, what):
    arr = np.broadcast_to(np.asarray(value, dtype=float), shape).copy()
    if not np.all(np.isfinite(arr)):
        raise EvaluationFailure(f"{what} closure returned non-finite values")
    return arr


def embed_direction(e, d: int) -> np.ndarray:
    v = np.atleast_1d(np.asarray(e, dtype=float))
    if d == 1:
        v = v[:1]
    if v.size != d:
        raise InvalidSpec(f"direction {tuple(v)} is not a vector in R^{d}")
    norm = float(np.linalg.norm(v))
    if not norm > 0:
        raise InvalidSpec("direction must be nonzero")
    v = v / norm
    return np.array([v[0], v[1] if d == 2 else 0.0])


@dataclass(frozen=True, eq=False)
class FieldSet:
    grid: Grid
    A11: np.ndarray
    A12: np.ndarray
    A22: np.ndarray
    q1: np.ndarray
    q2: np.ndarray
    zeta: np.ndarray
    e: tuple
    defs: Optional[FieldDefs] = None
    scales: tuple = (1.0, 1.0, 1.0)  # drift, diffusion, reaction
    _reaction: Optional[Callable] = field(default=None, repr=False)

    def __post_init__(self):
        for a in (self.A11, self.A12, self.A22, self.q1, self.q2, self.zeta):
            a.setflags(write=False)

    @cached_property
    def e_tilde(self) -> np.ndarray:
        return embed_direction(self.e, self.grid.spec.d)

    @cached_property
    def _A_eigs(self) -> tuple[np.ndarray, np.ndarray]:
        mid = 0.5 * (self.A11 + self.A22)
        rad = np.hypot(0.5 * (self.A11 - self.A22), self.A12)
        return mid - rad, mid + rad

    @cached_property
    def alpha1(self) -> float:
        return float(self._A_eigs[0].min())

    @cached_property
    def alpha2(self) -> float:
        return float(self._A_eigs[1].max())

    @cached_property
    def q_dot_e(self) -> np.ndarray:
        e = self.e_tilde
        return e[0] * self.q1 + e[1] * self.q2

    @cached_property
    def eAe(self) -> np.ndarray:
        e = self.e_tilde
        return e[0] ** 2 * self.A11 + 2 * e[0] * e[1] * self.A12 + e[1] ** 2 * self.A22

    @cached_property
    def q_dot_e_inf(self) -> float:
        return float(np.max(np.abs(self.q_dot_e)))

    @cached_property
    def q_inf(self) -> float:
        return float(np.max(np.hypot(self.q1, self.q2)))

    @cached_property
    def zeta_inf(self) -> float:
        return float(np.max(np.abs(self.zeta)))

    @cached_property
    def zeta_mean(self) -> float:
        return self.grid.mean(self.zeta)

    @property
    def measure(self) -> float:
        return self.grid.measure

    def reaction(self, u: np.ndarray) -> np.ndarray:
        """``f`` at every node of ``u``; ``u`` may tile several cells in x."""
        k = u.shape[0] // self.grid.nx
        X, Y = self.grid.mesh
        X = np.concatenate([X + r * self.grid.spec.L1 for r in range(k)], axis=0)
        Y = np.tile(Y, (k, 1))
        if self._reaction is None:
            zeta = np.tile(self.zeta, (k, 1))
            return zeta * u * (1.0 - u)
        return self.scales[2] * np.asarray(self._reaction(X, Y, u), dtype=float)

    def scaled(self, drift: float = 1.0, diffusion: float = 1.0, reaction: float = 1.0) -> "FieldSet":
        """Multiply q, A and (zeta, f) by the given factors."""
        s = self.scales
        return replace(
            self,
            A11=self.A11 * diffusion, A12=self.A12 * diffusion, A22=self.A22 * diffusion,
            q1=self.q1 * drift, q2=self.q2 * drift, zeta=self.zeta * reaction,
            scales=(s[0] * drift, s[1] * diffusion, s[2] * reaction),
        )

    def with_direction(self, e) -> "FieldSet":
        embed_direction(e, self.grid.spec.d)
        return replace(self, e=tuple(np.atleast_1d(np.asarray(e, dtype=float))))

    def resampled(self, grid: Grid) -> "FieldSet":
        """Same definitions and scales on another grid."""
        if self.defs is None:
            raise InvalidSpec("field set has no analytic definitions to resample")
        out = sample_fields(grid, replace(self.defs, e=self.e))
        return out.scaled(*self.scales)


def sample_fields(grid: Grid, defs: FieldDefs) -> FieldSet:
    X, Y = grid.mesh
    shape = grid.shape
    A11, A12, A22 = (_broadcast(a, shape, "diffusion") for a in defs.diffusion(X, Y))
    zeta = _broadcast(defs.zeta(X, Y), shape, "zeta")
    if defs.drift is not None:
        q1, q2 = (_broadcast(v, shape, "drift") for v in defs.drift(X, Y))
    elif defs.stream is not None:
        if grid.is_strip:
            raise InvalidSpec("stream-only drift needs the torus; supply the drift closure")
        phi = _broadcast(defs.stream(X, Y), shape, "stream")
        q1, q2 = spectral.perp_gradient(grid, phi)
    else:
        q1 = np.zeros(shape)
        q2 = np.zeros(shape)
    if defs.reaction is not None:
        for s in (0.0, 0.5, 1.0):
            _broadcast(defs.reaction(X, Y, np.full(shape, s)), shape, "reaction")
    embed_direction(defs.e, grid.spec.d)
    return FieldSet(grid, A11, A12, A22, q1, q2, zeta, tuple(np.atleast_1d(defs.e)), defs,
                    _reaction=defs.reaction)


# -- validation ---------------------------------------------------------------

@dataclass(frozen=True)
class ConditionResult:
    name: str
    passed: bool
    residual: float
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    conditions: tuple

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.conditions)

    def __getitem__(self, name: str) -> ConditionResult:
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)

    def failures(self) -> list:
        return [c for c in self.conditions if not c.passed]


KPP_SAMPLES = np.linspace(0.0, 1.0, 33)[1:-1]


def divergence_residual(fields: FieldSet) -> float:
    div = spectral.divergence(fields.grid, np.asarray(fields.q1), np.asarray(fields.q2))
    return float(np.max(np.abs(div)))


def validate_fields(fields: FieldSet, div_tol: Optional[float] = None) -> ValidationReport:
    """Check ellipticity, drift hypotheses and the KPP reaction conditions."""
    g = fields.grid
    out = []
    asym = 0.0  # symmetric by storage
    out.append(ConditionResult("diffusion_elliptic", fields.alpha1 > 0 and asym == 0.0,
                               fields.alpha1, f"alpha1={fields.alpha1:.6g}, alpha2={fields.alpha2:.6g}"))
    if g.is_strip:
        walls = list(g.wall_rows())
        a12 = float(np.max(np.abs(fields.A12[:, walls])))
        tol = 1e-14 * max(fields.alpha2, 1e-300)
        out.append(ConditionResult("diffusion_wall_diagonal", a12 <= tol, a12,
                                   "A12 must vanish on the walls"))

    q_scale = max(fields.q_inf, 1e-300)
    mean_res = max(abs(g.mean(fields.q1)), abs(g.mean(fields.q2)))
    out.append(ConditionResult("drift_zero_mean", mean_res <= 1e-12 * q_scale, mean_res))
    tol = 1e-8 * q_scale if div_tol is None else div_tol
    div = divergence_residual(fields)
    out.append(ConditionResult("drift_divergence_free", div <= tol, div, f"tol={tol:.3g}"))
    if g.is_strip:
        walls = list(g.wall_rows())
        qn = float(np.max(np.abs(fields.q2[:, walls])))
        out.append(ConditionResult("drift_tangential", qn <= 1e-14 * q_scale, qn))

    zmin = float(fields.zeta.min())
    out.append(ConditionResult("growth_positive", zmin > 0, zmin))
    ends = max(float(np.max(np.abs(fields.reaction(np.full(g.shape, s))))) for s in (0.0, 1.0))
    out.append(ConditionResult("reaction_endpoints", ends <= 1e-14 * max(fields.zeta_inf, 1e-300), ends))
    worst_excess, worst_low = -np.inf, np.inf
    for s in KPP_SAMPLES:
        f = fields.reaction(np.full(g.shape, s))
        worst_excess = max(worst_excess, float(np.max(f - fields.zeta * s)))
        worst_low = min(worst_low, float(f.min()))
    ok = worst_low > 0 and worst_excess <= 1e-14 * max(fields.zeta_inf, 1e-300)
    out.append(ConditionResult("reaction_kpp", ok, max(worst_excess, -worst_low),
                               f"min f={worst_low:.3g}, max(f - zeta s)={worst_excess:.3g}"))
    return ValidationReport(tuple(out))


# -- catalog ------------------------------------------------------------------

def _log_phase_stream(x, y):
    frac = y - np.floor(y)
    s2 = np.sin(np.pi * y) ** 2
    safe = s2 >= 1.0 / 700.0
    with np.errstate(divide="ignore", invalid="ignore"):
        env = np.where(safe, np.exp(-1.0 / np.where(safe, s2, 1.0)), 0.0)
        phase = np.where(safe, np.log(np.where(frac > 0, frac, 1.0)), 0.0)
    return env * np.sin(2 * np.pi * (x + phase))


def read_fourier_modes(path) -> np.ndarray:
    """Rows ``kx ky a_cos a_sin`` from a plain text file; ``#`` starts a comment."""
    rows = []
    with open(path) as fh:
        for n, line in enumerate(fh, 1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            parts = text.split()
            if len(parts) != 4:
                raise InvalidSpec(f"{path}:{n}: expected 'kx ky a_cos a_sin'")
            kx, ky = int(parts[0]), int(parts[1])
            if (kx, ky) == (0, 0):
                raise InvalidSpec(f"{path}:{n}: the (0, 0) mode carries no drift")
            rows.append((kx, ky, float(parts[2]), float(parts[3])))
    if not rows:
        raise InvalidSpec(f"{path}: no modes")
    return np.array(rows)


def fourier_stream(modes: np.ndarray, L1: float, L2: float):
    """Stream function and its perpendicular gradient for a trig polynomial."""
    def phase(x, y, kx, ky):
        return 2 * np.pi * (kx * x / L1 + ky * y / L2)

    def stream(x, y):
        out = np.zeros(np.broadcast(x, y).shape)
        for kx, ky, ac, as_ in modes:
            th = phase(x, y, kx, ky)
            out += ac * np.cos(th) + as_ * np.sin(th)
        return out

    def drift(x, y):
        q1 = np.zeros(np.broadcast(x, y).shape)
        q2 = np.zeros_like(q1)
        for kx, ky, ac, as_ in modes:
            th = phase(x, y, kx, ky)
            d = -ac * np.sin(th) + as_ * np.cos(th)
            q1 -= 2 * np.pi * ky / L2 * d
            q2 += 2 * np.pi * kx / L1 * d
        return q1, q2

    return stream, drift


CATALOG = ("zero", "shear_sin", "shear_cos", "cellular", "log_phase", "fourier:<file>")


def catalog_defs(name: str, L1: float = 1.0, L2: float = 1.0, *, amplitude: float = 1.0,
                 zeta_const: float = 1.0, zeta_amp: float = 0.0, diffusion: float = 1.0,
                 diffusion_offdiag: float = 0.0, e=(1.0, 0.0)) -> FieldDefs:
    """Named catalog field with ``zeta = zeta_const + zeta_amp sin(2 pi y / L2)``.

    ``A = diffusion * [[1, b s], [b s, 1]]`` with ``s = sin(2 pi x/L1) sin(2 pi y/L2)``
    and ``b = diffusion_offdiag``.
    """
    kx, ky = 2 * np.pi / L1, 2 * np.pi / L2
    a = amplitude

    def A(x, y):
        off = diffusion * diffusion_offdiag * np.sin(kx * x) * np.sin(ky * y)
        return diffusion, off, diffusion

    def zeta(x, y):
        return zeta_const + zeta_amp * np.sin(ky * y)

    stream = drift = None
    if name == "zero":
        def drift(x, y):
            return 0.0, 0.0
    elif name == "shear_sin":
        def drift(x, y):
            return a * np.sin(ky * y), 0.0

        def stream(x, y):
            return a * np.cos(ky * y) / ky + 0 * x
    elif name == "shear_cos":
        def drift(x, y):
            return a * np.cos(ky * y), 0.0

        def stream(x, y):
            return -a * np.sin(ky * y) / ky + 0 * x
    elif name == "cellular":
        def stream(x, y):
            return a * np.sin(kx * x) * np.sin(ky * y) / (2 * np.pi)

        def drift(x, y):
            return (-a * ky * np.sin(kx * x) * np.cos(ky * y) / (2 * np.pi),
                    a * kx * np.cos(kx * x) * np.sin(ky * y) / (2 * np.pi))
    elif name == "log_phase":
        if (L1, L2) != (1.0, 1.0):
            raise InvalidSpec("log_phase is defined on the unit cell")

        def stream(x, y):
            return a * _log_phase_stream(x, y)
    elif name.startswith("fourier:"):
        modes = read_fourier_modes(name.split(":", 1)[1])
        s, q = fourier_stream(modes, L1, L2)

        def stream(x, y):
            return a * s(x, y)

        def drift(x, y):
            q1, q2 = q(x, y)
            return a * q1, a * q2
    else:
        raise InvalidSpec(f"unknown field {name!r}; catalog: {', '.join(CATALOG)}")
    return FieldDefs(diffusion=A, zeta=zeta, drift=drift, stream=stream,
                     reaction=kpp_reaction(zeta), e=tuple(e), name=name)


def drift_vector(fields: FieldSet, w: np.ndarray) -> np.ndarray:
    """Grid quadrature of ``(int q1 w^2, int q2 w^2)`` over the cell."""
    g = fields.grid
    w2 = np.asarray(w) ** 2
    return np.array([g.integrate(fields.q1 * w2), g.integrate(fields.q2 * w2)])
