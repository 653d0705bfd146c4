"""Hot inner loops, each with a numba kernel and a numpy twin.

The public wrappers (:func:`project`, :func:`sgd_chunk`, :func:`wealth_paths`)
dispatch on :data:`rckelly._accel.USE_NUMBA`. Both twins implement the same
arithmetic; they agree to rounding, not bit for bit.
"""
import math

import numpy as np

from rckelly._accel import USE_NUMBA, njit

__all__ = [
    "ProjectionError",
    "project",
    "project_numba",
    "project_numpy",
    "sgd_chunk",
    "sgd_chunk_numba",
    "sgd_chunk_numpy",
    "wealth_paths",
    "wealth_paths_numba",
    "wealth_paths_numpy",
]

PROJ_TOL = 1e-12
PROJ_MAX_ITER = 200


class ProjectionError(ArithmeticError):
    """Bisection for the simplex shift failed to reach its tolerance."""


# ---------------------------------------------------------------- projection


@njit
def _h_nb(z, nu, eps):
    n = z.shape[0]
    s = 0.0
    for i in range(n - 1):
        d = z[i] - nu
        if d > 0.0:
            s += d
    d = z[n - 1] - nu
    s += d if d > eps else eps
    return s


@njit
def _polish_nb(z, nu, eps):
    # exact shift on the active set identified by nu
    n = z.shape[0]
    s = 0.0
    cnt = 0
    for i in range(n - 1):
        if z[i] > nu:
            s += z[i]
            cnt += 1
    if z[n - 1] - nu > eps:
        s += z[n - 1]
        cnt += 1
    else:
        s += eps
    if cnt == 0:
        return nu
    return (s - 1.0) / cnt


@njit
def lower_shift(zmax):
    """Largest float ``nu <= zmax - 1`` with ``zmax - nu >= 1`` in floating point."""
    lo = zmax - 1.0
    while zmax - lo < 1.0:
        lo -= max(abs(lo), 1.0) * 1.1102230246251565e-16
    return lo


@njit
def _project_core_nb(z0, eps, tol, max_iter, out):
    n = z0.shape[0]
    top = z0[0]
    for i in range(1, n):
        if z0[i] > top:
            top = z0[i]
    # the projection is shift invariant; centring at the max keeps h accurate
    z = z0 - top
    zmax = 0.0
    lo = -1.0
    hi = zmax
    nu = hi
    h = _h_nb(z, hi, eps)
    ok = abs(h - 1.0) <= tol
    if not ok:
        nu = lo
        h = _h_nb(z, lo, eps)
        ok = abs(h - 1.0) <= tol
    it = 0
    while not ok and it < max_iter:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        h = _h_nb(z, mid, eps)
        nu = mid
        if h > 1.0:
            lo = mid
        else:
            hi = mid
        ok = abs(h - 1.0) <= tol
        it += 1
    nu2 = _polish_nb(z, nu, eps)
    h2 = _h_nb(z, nu2, eps)
    if abs(h2 - 1.0) <= abs(h - 1.0):
        nu = nu2
        h = h2
    ok = abs(h - 1.0) <= tol
    for i in range(n - 1):
        d = z[i] - nu
        out[i] = d if d > 0.0 else 0.0
    d = z[n - 1] - nu
    out[n - 1] = d if d > eps else eps
    return nu + top, ok


@njit
def _project_nb(z, eps, tol, max_iter):
    out = np.empty_like(z)
    nu, ok = _project_core_nb(z, eps, tol, max_iter, out)
    return out, nu, ok


def _h_np(z, nu, eps):
    return np.maximum(z[:-1] - nu, 0.0).sum() + max(z[-1] - nu, eps)


def _project_np(z0, eps, tol, max_iter):
    top = z0.max()
    z = z0 - top
    zmax = 0.0
    lo, hi = -1.0, zmax
    nu = hi
    h = _h_np(z, hi, eps)
    ok = abs(h - 1.0) <= tol
    if not ok:
        nu = lo
        h = _h_np(z, lo, eps)
        ok = abs(h - 1.0) <= tol
    it = 0
    while not ok and it < max_iter:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        h = _h_np(z, mid, eps)
        nu = mid
        if h > 1.0:
            lo = mid
        else:
            hi = mid
        ok = abs(h - 1.0) <= tol
        it += 1
    active = z[:-1] > nu
    cash_free = z[-1] - nu > eps
    cnt = int(active.sum()) + int(cash_free)
    if cnt:
        s = z[:-1][active].sum() + (z[-1] if cash_free else eps)
        nu2 = (s - 1.0) / cnt
        h2 = _h_np(z, nu2, eps)
        if abs(h2 - 1.0) <= abs(h - 1.0):
            nu, h = nu2, h2
    ok = abs(h - 1.0) <= tol
    out = np.maximum(z - nu, 0.0)
    out[-1] = max(z[-1] - nu, eps)
    return out, nu + top, ok


def _check_projection(z, ok):
    if not ok:
        raise ProjectionError(f"simplex shift bisection did not converge for z={z!r}")


def project_numba(z, eps, tol=PROJ_TOL, max_iter=PROJ_MAX_ITER):
    z = np.ascontiguousarray(z, dtype=np.float64)
    out, nu, ok = _project_nb(z, float(eps), float(tol), int(max_iter))
    _check_projection(z, ok)
    return out, float(nu)


def project_numpy(z, eps, tol=PROJ_TOL, max_iter=PROJ_MAX_ITER):
    z = np.asarray(z, dtype=np.float64)
    out, nu, ok = _project_np(z, float(eps), float(tol), int(max_iter))
    _check_projection(z, ok)
    return out, float(nu)


def project(z, eps, tol=PROJ_TOL, max_iter=PROJ_MAX_ITER):
    """Return ``(b, nu)`` with ``b = (z - nu 1)_{+,eps}`` summing to one.

    Inputs are assumed finite; :mod:`rckelly.simplex` validates them.
    """
    if USE_NUMBA:
        return project_numba(z, eps, tol, max_iter)
    return project_numpy(z, eps, tol, max_iter)


# ------------------------------------------------- stochastic gradient chunk


@njit
def _sgd_chunk_nb(samples, b_bar, kappa, k0, C, lam, eps, cap, dual, acc_b, acc):
    m, batch, n = samples.shape
    grad = np.empty(n)
    z = np.empty(n)
    ok_all = True
    for j in range(m):
        t = C / math.sqrt(k0 + j)
        for i in range(n):
            acc_b[i] += t * b_bar[i]
        acc[0] += t
        acc[1] += t * kappa
        for i in range(n):
            grad[i] = 0.0
        dk = 0.0
        for s in range(batch):
            rb = 0.0
            for i in range(n):
                rb += samples[j, s, i] * b_bar[i]
            if dual:
                neg = math.exp(-lam * math.log(rb))
                w = 1.0 / rb + lam * kappa * neg / rb
                dk += neg - 1.0
            else:
                w = 1.0 / rb
            for i in range(n):
                grad[i] += w * samples[j, s, i]
        for i in range(n):
            z[i] = b_bar[i] + t * grad[i] / batch
        nu, ok = _project_core_nb(z, eps, PROJ_TOL, PROJ_MAX_ITER, b_bar)
        ok_all = ok_all and ok
        if dual:
            kappa = kappa + t * dk / batch
            if kappa < 0.0:
                kappa = 0.0
            elif kappa > cap:
                kappa = cap
    return kappa, ok_all


def _sgd_chunk_np(samples, b_bar, kappa, k0, C, lam, eps, cap, dual, acc_b, acc):
    m = samples.shape[0]
    ok_all = True
    for j in range(m):
        t = C / math.sqrt(k0 + j)
        acc_b += t * b_bar
        acc[0] += t
        acc[1] += t * kappa
        r = samples[j]
        rb = r @ b_bar
        if dual:
            neg = np.exp(-lam * np.log(rb))
            w = 1.0 / rb + lam * kappa * neg / rb
            dk = float(np.mean(neg - 1.0))
        else:
            w = 1.0 / rb
        z = b_bar + t * (w @ r) / r.shape[0]
        new, _, ok = _project_np(z, eps, PROJ_TOL, PROJ_MAX_ITER)
        ok_all = ok_all and ok
        b_bar[:] = new
        if dual:
            kappa = min(max(kappa + t * dk, 0.0), cap)
    return kappa, ok_all


def _run_chunk(impl, samples, b_bar, kappa, k0, C, lam, eps, cap, dual, acc_b, acc):
    kappa, ok = impl(
        np.ascontiguousarray(samples, dtype=np.float64),
        b_bar,
        float(kappa),
        int(k0),
        float(C),
        float(lam),
        float(eps),
        float(cap),
        bool(dual),
        acc_b,
        acc,
    )
    if not ok:
        raise ProjectionError("projection failed inside the gradient loop")
    return float(kappa)


def sgd_chunk_numba(samples, b_bar, kappa, k0, C, lam, eps, cap, dual, acc_b, acc):
    return _run_chunk(_sgd_chunk_nb, samples, b_bar, kappa, k0, C, lam, eps, cap, dual, acc_b, acc)


def sgd_chunk_numpy(samples, b_bar, kappa, k0, C, lam, eps, cap, dual, acc_b, acc):
    return _run_chunk(_sgd_chunk_np, samples, b_bar, kappa, k0, C, lam, eps, cap, dual, acc_b, acc)


def sgd_chunk(samples, b_bar, kappa, k0, C, lam, eps, cap, dual, acc_b, acc):
    """Advance the projected (primal-dual) stochastic gradient iteration.

    ``samples`` has shape ``(iterations, batch, n)``; iteration ``j`` uses step
    ``C / sqrt(k0 + j)``. ``b_bar`` and the running sums ``acc_b`` (weighted
    bets) and ``acc = [sum t, sum t*kappa]`` are updated in place. With
    ``dual=False`` the dual variable is ignored and the plain Kelly gradient
    ``r / r^T b`` is used. Returns the new dual iterate.
    """
    impl = sgd_chunk_numba if USE_NUMBA else sgd_chunk_numpy
    return impl(samples, b_bar, kappa, k0, C, lam, eps, cap, dual, acc_b, acc)


# ------------------------------------------------------------- wealth paths


@njit
def _wealth_nb(rb):
    N, T = rb.shape
    wmin = np.empty(N)
    final = np.empty(N)
    for k in range(N):
        lw = 0.0
        lo = 0.0
        for t in range(T):
            x = rb[k, t]
            if x <= 0.0:
                lw = -np.inf
            else:
                lw += math.log(x)
            if lw < lo:
                lo = lw
        wmin[k] = math.exp(lo)
        final[k] = lw
    return wmin, final


def _wealth_np(rb):
    with np.errstate(divide="ignore"):
        logs = np.log(np.where(rb > 0.0, rb, 0.0))
    # -inf + finite stays -inf, so ruin propagates through the cumsum
    lw = np.cumsum(logs, axis=1)
    lo = np.minimum(lw.min(axis=1, initial=0.0), 0.0)
    final = lw[:, -1] if rb.shape[1] else np.zeros(rb.shape[0])
    return np.exp(lo), final


def wealth_paths_numba(rb):
    return _wealth_nb(np.ascontiguousarray(rb, dtype=np.float64))


def wealth_paths_numpy(rb):
    return _wealth_np(np.asarray(rb, dtype=np.float64))


def wealth_paths(rb):
    """Per-trajectory ``(W^min, log w_T)`` from per-period returns ``r^T b``.

    Row ``k`` of ``rb`` holds the ``T - 1`` period returns of trajectory ``k``.
    Wealth starts at one, so the minimum never exceeds one; a zero return is
    ruin and gives ``W^min = 0`` and ``log w_T = -inf``.
    """
    return wealth_paths_numba(rb) if USE_NUMBA else wealth_paths_numpy(rb)
