"""FFT derivatives on the torus, and on the strip through its y-reflection.

The strip ``[0, L2]`` (rows ``0..ny``) is doubled to the torus of height
``2 L2``: even fields reflect as ``f(2 L2 - y)``, odd ones as ``-f(2 L2 - y)``.
"""
from __future__ import annotations

import numpy as np

from .grid import Grid


def wavenumbers(n: int, length: float) -> np.ndarray:
    return 2.0 * np.pi * np.fft.fftfreq(n, d=length / n)


def reflect(values: np.ndarray, parity: int) -> np.ndarray:
    """Extend strip rows ``0..ny`` to ``2 ny`` periodic rows."""
    interior = values[:, -2:0:-1]
    return np.concatenate([values, parity * interior], axis=1)


def _odd_derivative_factor(n: int, length: float) -> np.ndarray:
    k = 1j * wavenumbers(n, length)
    if n % 2 == 0:
        k[n // 2] = 0.0
    return k


def torus_gradient(values: np.ndarray, L1: float, L2: float) -> tuple[np.ndarray, np.ndarray]:
    nx, ny = values.shape
    f = np.fft.fft2(values)
    kx = _odd_derivative_factor(nx, L1)[:, None]
    ky = _odd_derivative_factor(ny, L2)[None, :]
    return np.real(np.fft.ifft2(kx * f)), np.real(np.fft.ifft2(ky * f))


def gradient(grid: Grid, values: np.ndarray, parity: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Spectral gradient; ``parity`` is the reflection parity of ``values`` on the strip."""
    if not grid.is_strip:
        return torus_gradient(values, grid.spec.L1, grid.spec.L2)
    gx, gy = torus_gradient(reflect(values, parity), grid.spec.L1, 2 * grid.spec.L2)
    rows = grid.n_rows
    return gx[:, :rows], gy[:, :rows]


def divergence(grid: Grid, vx: np.ndarray, vy: np.ndarray) -> np.ndarray:
    """Spectral divergence; on the strip ``vx`` reflects evenly and ``vy`` oddly."""
    dx, _ = gradient(grid, vx, parity=1)
    _, dy = gradient(grid, vy, parity=-1)
    return dx + dy


def perp_gradient(grid: Grid, phi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``(-d phi/dy, d phi/dx)``."""
    gx, gy = gradient(grid, phi, parity=1)
    return -gy, gx
