"""Periodicity cell and its uniform node grid.

Arrays on the grid have shape ``(nx, n_rows)`` and are indexed ``[i, j]`` with
``x = i * hx`` and ``y = j * hy``.  On the torus ``n_rows = ny`` and both
directions wrap; on the strip ``n_rows = ny + 1`` and rows ``0`` and ``ny``
are the walls ``y = 0`` and ``y = L2``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import InvalidSpec

TORUS = "torus"
STRIP = "strip"


@dataclass(frozen=True)
class CellSpec:
    d: int = 2
    L1: float = 1.0
    L2: float = 1.0
    nx: int = 64
    ny: int = 64
    geometry: str = TORUS

    def refined(self, n: int) -> "CellSpec":
        """Same cell with ``n`` nodes per direction."""
        return CellSpec(self.d, self.L1, self.L2, n, n, self.geometry)


def check_spec(spec: CellSpec) -> None:
    if not (spec.L1 > 0 and spec.L2 > 0):
        raise InvalidSpec(f"cell lengths must be positive, got L1={spec.L1}, L2={spec.L2}")
    for name, n in (("nx", spec.nx), ("ny", spec.ny)):
        if int(n) != n or n < 8 or n % 2:
            raise InvalidSpec(f"{name} must be an even integer >= 8, got {n}")
    if spec.geometry not in (TORUS, STRIP):
        raise InvalidSpec(f"unknown geometry {spec.geometry!r}")
    if (spec.geometry == TORUS) != (spec.d == 2):
        raise InvalidSpec(f"geometry {spec.geometry!r} does not match d={spec.d}")


@dataclass(frozen=True, eq=False)
class Grid:
    spec: CellSpec

    @property
    def nx(self) -> int:
        return self.spec.nx

    @property
    def ny(self) -> int:
        return self.spec.ny

    @property
    def hx(self) -> float:
        return self.spec.L1 / self.spec.nx

    @property
    def hy(self) -> float:
        return self.spec.L2 / self.spec.ny

    @property
    def is_strip(self) -> bool:
        return self.spec.geometry == STRIP

    @property
    def n_rows(self) -> int:
        return self.ny + 1 if self.is_strip else self.ny

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.n_rows)

    @property
    def size(self) -> int:
        return self.nx * self.n_rows

    @property
    def measure(self) -> float:
        return self.spec.L1 * self.spec.L2

    @cached_property
    def x(self) -> np.ndarray:
        return np.arange(self.nx) * self.hx

    @cached_property
    def y(self) -> np.ndarray:
        return np.arange(self.n_rows) * self.hy

    @cached_property
    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.y, indexing="ij")

    @cached_property
    def weights(self) -> np.ndarray:
        """Quadrature weights; trapezoidal across the strip so they sum to L1*L2."""
        w = np.full(self.shape, self.hx * self.hy)
        if self.is_strip:
            w[:, 0] *= 0.5
            w[:, -1] *= 0.5
        return w

    def integrate(self, values: np.ndarray) -> float:
        return float(np.sum(self.weights * values))

    def mean(self, values: np.ndarray) -> float:
        return self.integrate(values) / self.measure

    def index(self, i, j):
        """Flat index with the x-wrap (and y-wrap on the torus) applied."""
        i = np.mod(i, self.nx)
        if not self.is_strip:
            j = np.mod(j, self.ny)
        return i * self.n_rows + j

    def shift(self, values: np.ndarray, di: int = 0, dj: int = 0) -> np.ndarray:
        """``out[i, j] = values[i + di, j + dj]`` using the periodic wraps."""
        if self.is_strip and dj:
            raise ValueError("no y-wrap on the strip")
        return np.roll(values, (-di, -dj), axis=(0, 1))

    def wall_rows(self) -> tuple[int, ...]:
        return (0, self.ny) if self.is_strip else ()


def build_grid(spec: CellSpec) -> Grid:
    check_spec(spec)
    return Grid(spec)
