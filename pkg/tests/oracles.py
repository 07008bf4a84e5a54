"""Independent reference computations used to freeze expected values.

For a shear drift ``q = (a sin(2 pi y / L), 0)`` along ``e = e1`` with
``A = I`` and constant ``zeta`` the principal eigenfunction depends on ``y``
only, so every quantity reduces to a periodic Hill operator
``d^2/dy^2 + V(y)``.  These helpers diagonalize it in a Fourier basis, which
shares nothing with the finite-difference code under test.
"""
import numpy as np
from scipy.optimize import minimize_scalar


def hill_top(const: float, amp: float, L: float = 1.0, modes: int = 64) -> float:
    """Top eigenvalue of ``w'' + (const + amp cos(2 pi y / L)) w`` on a period ``L``."""
    n = np.arange(-modes, modes + 1)
    H = np.diag(const - (2 * np.pi * n / L) ** 2)
    off = np.full(2 * modes, amp / 2.0)
    H += np.diag(off, 1) + np.diag(off, -1)
    return float(np.linalg.eigvalsh(H)[-1])


def shear_k(lam: float, M: float, zeta: float = 1.0) -> float:
    """``k(lam, M)`` for the unit shear: potential ``lam^2 + zeta + lam M sin``."""
    return hill_top(lam * lam + zeta, lam * M)


def shear_speed(M: float, zeta: float = 1.0) -> float:
    res = minimize_scalar(lambda s: shear_k(np.exp(s), M, zeta) / np.exp(s),
                          bracket=(-3.0, 0.0, 3.0), tol=1e-12)
    return float(res.fun)


def shear_g(lam: float, zeta: float = 1.0) -> float:
    """Largest ``int (zeta w^2 - w'^2 + lam sin w^2) / int w^2`` over y-functions."""
    return hill_top(zeta, lam)


def shear_large_drift_limit(zeta: float = 1.0) -> tuple:
    res = minimize_scalar(lambda s: shear_g(np.exp(s), zeta) / np.exp(s),
                          bracket=(0.0, 2.0, 5.0), tol=1e-12)
    return float(res.fun), float(np.exp(res.x))


def shear_mixed_limit(zeta_mean: float = 1.0) -> float:
    """``2 sqrt(zeta_mean) * sup int q w / |w'|`` with ``w = sin(2 pi y) / (4 pi^2)``."""
    return 2.0 * np.sqrt(zeta_mean) / (2.0 * np.sqrt(2.0) * np.pi)
