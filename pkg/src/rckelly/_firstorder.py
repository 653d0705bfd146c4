"""Deterministic projected-gradient engine shared by the exact solvers.

Minimizes a smooth convex function over the truncated simplex with
Nesterov momentum, function-value restarts and, unless a Lipschitz constant
is supplied, a step size that adapts to the local curvature bound.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from rckelly import kernels


def simplex_stationarity(ascent, b, support_tol: float, level=None) -> float:
    """Largest violation of first-order optimality on the simplex.

    ``ascent`` is the gradient of the function being *maximized*. At an
    optimum every coordinate held (``b_i > support_tol``) shares the same
    ascent value and no other coordinate exceeds it. ``level`` fixes that
    common value when it is known in closed form; otherwise the largest
    ascent over the support is used.
    """
    u = np.asarray(ascent, dtype=float)
    held = np.asarray(b) > support_tol * (1.0 + 1e-9)
    if not held.any():
        held = np.asarray(b) >= np.max(b)
    c = float(u[held].max()) if level is None else float(level)
    on = np.abs(u[held] - c).max()
    off = np.maximum(u[~held] - c, 0.0).max(initial=0.0)
    return float(max(on, off))


@dataclass
class FOResult:
    x: np.ndarray
    fun: float
    grad: np.ndarray
    iterations: int
    converged: bool
    residual: float


def minimize(fun_grad, x0, eps, *, tol, support_tol, max_iter=50_000, lipschitz=None, patience=200):
    """Minimize ``fun_grad`` (returning ``(f, grad)``) over the truncated simplex.

    Stops when :func:`simplex_stationarity` of ``-grad`` drops to ``tol``, or
    when ``patience`` iterations pass without the objective decreasing beyond
    roundoff (reported as not converged). A fixed ``lipschitz`` constant gives
    the classical ``1/L`` step; without one the step is halved whenever the
    quadratic upper bound fails and relaxed by 10% after every accepted step.
    """
    proj = kernels.project
    x = proj(np.asarray(x0, dtype=float), eps)[0]
    fx, gx = fun_grad(x)
    fixed = lipschitz is not None
    L = float(lipschitz) if fixed else max(1.0, float(np.linalg.norm(gx)))
    if fixed and L <= 0:
        L = 1.0
    y, fy, gy = x, fx, gx
    t = 1.0
    res = simplex_stationarity(-gx, x, support_tol)
    it = 0
    best, since = fx, 0
    while res > tol and it < max_iter:
        it += 1
        if fx < best - 1e-15 * (1.0 + abs(best)):
            best, since = fx, 0
        else:
            since += 1
            if since > patience:
                break
        while True:
            xn = proj(y - gy / L, eps)[0]
            fn, gn = fun_grad(xn)
            if fixed:
                break
            d = xn - y
            slack = 1e-14 * (1.0 + abs(fy))
            if math.isfinite(fn) and fn <= fy + gy @ d + 0.5 * L * (d @ d) + slack:
                break
            L *= 2.0
            if L > 1e30:
                return FOResult(x, fx, gx, it, False, res)
        if not fn <= fx:
            # momentum overshot: restart from the last accepted point
            if t == 1.0:
                # plain gradient step failed to descend; only roundoff is left
                if fixed or fn - fx > 1e-13 * (1.0 + abs(fx)):
                    break
                x, fx, gx = xn, fn, gn
            t = 1.0
            y, fy, gy = x, fx, gx
            res = simplex_stationarity(-gx, x, support_tol)
            continue
        tn = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        y = xn + ((t - 1.0) / tn) * (xn - x)
        y = proj(y, eps)[0]
        x, fx, gx, t = xn, fn, gn, tn
        fy, gy = fun_grad(y)
        if not math.isfinite(fy):
            y, fy, gy, t = x, fx, gx, 1.0
        if not fixed:
            L *= 0.9
        res = simplex_stationarity(-gx, x, support_tol)
    return FOResult(x, fx, gx, it, res <= tol, res)
