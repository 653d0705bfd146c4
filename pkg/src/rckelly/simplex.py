"""Euclidean projection onto the truncated simplex.

``{b : 1^T b = 1, b >= 0, b_n >= eps}``. The projection is ``(z - nu 1)``
clipped at zero (and at ``eps`` for the last coordinate), where the scalar
shift ``nu`` solves ``h(nu) = 1``; ``h`` is nonincreasing so ``nu`` is found by
bisection on ``[max(z) - 1, max(z)]``. The lower end is rounded down when
``max(z) - 1`` is inexact, so ``h >= 1`` there holds in floating point too.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from rckelly import kernels
from rckelly.kernels import ProjectionError
from rckelly.model import BetVector

__all__ = ["ProjectionError", "TruncatedSimplex", "bisect_nu", "bracket", "clip_shift", "project", "shift_residual"]


@dataclass(frozen=True)
class TruncatedSimplex:
    n: int
    eps: float = 0.0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if not 0.0 <= self.eps <= 1.0:
            raise ValueError("eps must lie in [0, 1]")

    def contains(self, b, tol: float = 1e-10) -> bool:
        b = np.asarray(b, dtype=float)
        return (
            b.shape == (self.n,)
            and b.min() >= -tol
            and b[-1] >= self.eps - tol
            and abs(b.sum() - 1.0) <= tol
        )


def _validate(z, domain: TruncatedSimplex) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (domain.n,):
        raise ValueError(f"expected a vector of length {domain.n}, got shape {z.shape}")
    if not np.all(np.isfinite(z)):
        raise ValueError("cannot project a vector with NaN or infinite entries")
    return z


def clip_shift(z, nu: float, eps: float) -> np.ndarray:
    """``(z - nu 1)_{+,eps}``."""
    z = np.asarray(z, dtype=np.float64)
    out = np.maximum(z - nu, 0.0)
    out[-1] = max(z[-1] - nu, eps)
    return out


def shift_residual(z, nu: float, eps: float) -> float:
    """``h(nu) = 1^T (z - nu 1)_{+,eps}``."""
    return float(clip_shift(z, nu, eps).sum())


def bracket(z) -> tuple:
    """Shifts ``(lo, hi)`` with ``h(lo) >= 1`` and ``h(hi) = eps`` exactly."""
    zmax = float(np.max(z))
    return kernels.lower_shift(zmax), zmax


def bisect_nu(z, domain: TruncatedSimplex) -> float:
    """Shift ``nu`` with ``|h(nu) - 1| <= 1e-12``.

    Raises :class:`ProjectionError` if the bisection stalls, which only happens
    for inputs so large that the bracket cannot resolve the tolerance.
    """
    z = _validate(z, domain)
    _, nu = kernels.project(z, domain.eps)
    return nu


def project(z, domain: TruncatedSimplex) -> BetVector:
    """Nearest point of ``domain`` to ``z``."""
    z = _validate(z, domain)
    b, _ = kernels.project(z, domain.eps)
    return BetVector(b)
