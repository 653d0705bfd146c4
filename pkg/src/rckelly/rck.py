"""Risk-constrained Kelly (RCK) bets.

The RCK problem maximizes ``E log(r^T b)`` subject to ``E (r^T b)^-lam <= 1``.
Any feasible bet satisfies ``Prob(W_min < alpha) < alpha**lam`` for every
``alpha`` in (0, 1).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from rckelly import _firstorder, expect, kelly
from rckelly.expect import Residuals, optimality_residual
from rckelly.model import (
    BetVector,
    FiniteOutcomeModel,
    ReturnSampler,
    SolveReport,
    SolverConfig,
    cdf_bound,
)

__all__ = [
    "Certificate",
    "Residuals",
    "SolverConfig",
    "certify",
    "light_regime_approx",
    "optimality_residual",
    "risk_value",
    "solve_finite_rck",
    "solve_sampled_rck",
    "solve_two_outcome_rck",
]

#: stationarity tolerance of the inner Lagrangian solves, relative to kkt_tol
_INNER = 1e-4


def risk_value(source, b, lam: float, *, count: int = expect.DEFAULT_COUNT, stream: int = expect.HOLDOUT_STREAM) -> float:
    """``E (r^T b)^-lam``: exact for finite models, a Monte Carlo mean for samplers.

    Use :func:`rckelly.expect.estimate_risk` for the standard error.
    """
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    return expect.estimate_risk(source, b, lam, count, stream).value


@dataclass(frozen=True)
class Certificate:
    """Drawdown guarantee implied by ``E (r^T b)^-lam <= 1``.

    When ``guaranteed`` the whole CDF of the minimum wealth sits below
    ``alpha -> alpha**lam``; :meth:`bound_at` evaluates it at any threshold.
    """

    guaranteed: bool
    lam: float
    alpha: Optional[float]
    risk_value: float
    bound: Optional[float]

    def bound_at(self, alpha: float) -> Optional[float]:
        return cdf_bound(self.lam, alpha) if self.guaranteed else None

    def to_dict(self) -> dict:
        return {
            "guaranteed": self.guaranteed,
            "lambda": self.lam,
            "alpha": self.alpha,
            "risk_value": self.risk_value,
            "bound": self.bound,
        }


def certify(b, lam: float, alpha: Optional[float], risk_value: float, *, tol: float = 0.0) -> Certificate:
    """Turn a risk value into a drawdown certificate at threshold ``alpha``."""
    ok = bool(risk_value <= 1.0 + tol) and lam >= 0
    bound = cdf_bound(lam, alpha) if (ok and alpha is not None) else None
    return Certificate(ok, float(lam), alpha, float(risk_value), bound)


# ----------------------------------------------------------- two outcomes


def _two_outcome_risk(b1: float, pi: float, P: float, lam: float) -> float:
    win = 1.0 + b1 * (P - 1.0)
    lose = 1.0 - b1
    if lose <= 0.0:
        return math.inf
    return pi * math.exp(-lam * math.log(win)) + (1.0 - pi) * math.exp(-lam * math.log(lose))


def solve_two_outcome_rck(pi: float, P: float, lam: float, *, bisect_tol: float = 1e-12) -> BetVector:
    """RCK bet for the two-outcome wager.

    The risk function is convex in ``b1`` and equals one at ``b1 = 0``, so
    when the Kelly fraction is infeasible the answer is the other root of
    ``risk = 1``, found by bisection between 0 and the Kelly fraction.
    """
    kb = kelly.solve_two_outcome(pi, P)
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    b_star = kb[0]
    if lam == 0 or b_star == 0.0 or _two_outcome_risk(b_star, pi, P, lam) <= 1.0:
        return kb
    lo, hi = 0.0, b_star
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        r = _two_outcome_risk(mid, pi, P, lam)
        if r <= 1.0:
            lo = mid
            if 1.0 - r <= bisect_tol:
                break
        else:
            hi = mid
    return BetVector([lo, 1.0 - lo])


# --------------------------------------------------------- finite outcomes


def _lagrangian(model: FiniteOutcomeModel, lam: float, kappa: float):
    """``-E log(r^T b) + kappa (E (r^T b)^-lam - 1)`` and its gradient."""
    R = model.returns
    p = model.probs
    logp = np.log(p)

    def fun_grad(b):
        rb = R @ b
        lrb = np.log(rb)
        f = -float(p @ lrb)
        g = -((p / rb) @ R)
        if kappa:
            with np.errstate(over="ignore"):
                a = logp - lam * lrb
                risk = math.fsum(np.exp(a))
                f += kappa * (risk - 1.0)
                g = g - kappa * lam * ((np.exp(a) / rb) @ R)
            if not (math.isfinite(f) and np.all(np.isfinite(g))):
                return math.inf, g
        return f, g

    return fun_grad


def solve_finite_rck(
    model: FiniteOutcomeModel, lam: float, config: Optional[SolverConfig] = None
) -> SolveReport:
    """RCK bet for a finite-outcome model, certified by the optimality residual.

    The Lagrangian is minimized over the truncated simplex for a given
    multiplier ``kappa`` by exact projected gradient. ``kappa`` is the root of
    ``log E (r^T b(kappa))^-lam = 0``, a nonincreasing function of ``kappa``,
    found with Brent's method on ``[0, dual_cap]``. If the root lies above
    ``dual_cap`` the bracket is widened and ``flags["dual_cap_hit"]`` is set.
    """
    config = config or SolverConfig()
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    n = model.n
    flags = {"no_bet": False, "dual_cap_hit": False, "constraint_active": False}

    if kelly.detect_no_bet(model):
        b = BetVector.cash(n).weights.copy()
        flags["no_bet"] = True
        return kelly._report_finite(model, b, 0.0, lam, config, iterations=0, method="rck", flags=flags)

    kr = kelly.solve_finite(model, config)
    b_k = np.asarray(kr.bet, dtype=float).copy()
    R, p = model.returns, model.probs
    phi0 = expect.log_risk(R, p, b_k, lam)
    if lam == 0 or phi0 <= 0.0:
        flags["cash_floor_active"] = kr.flags.get("cash_floor_active", False)
        return kelly._report_finite(model, b_k, 0.0, lam, config, iterations=kr.iterations, method="rck", flags=flags)

    flags["constraint_active"] = True
    inner_tol = _INNER * config.kkt_tol
    state = {"b": BetVector.cash(n).weights.copy(), "iters": kr.iterations}

    def solve_at(kappa, tol=inner_tol):
        # the Lagrangian gradient scales with 1 + kappa lam
        fo = _firstorder.minimize(
            _lagrangian(model, lam, kappa),
            state["b"],
            config.eps,
            tol=tol * (1.0 + kappa * lam),
            support_tol=config.support_tol,
        )
        state["b"] = fo.x
        state["iters"] += fo.iterations
        return fo

    def phi(kappa):
        if kappa == 0.0:
            return phi0
        solve_at(kappa)
        return expect.log_risk(R, p, state["b"], lam)

    hi = config.dual_cap
    phi_hi = phi(hi)
    while phi_hi > 0.0:
        flags["dual_cap_hit"] = True
        hi *= 4.0
        if hi > 1e12 * config.dual_cap:
            break
        phi_hi = phi(hi)
    if phi_hi > 0.0:
        kappa = hi
    else:
        kappa = brentq(phi, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    solve_at(kappa, tol=0.1 * inner_tol)
    b = state["b"] / state["b"].sum()
    flags["cash_floor_active"] = bool(b[-1] <= config.eps * (1 + 1e-9))
    return kelly._report_finite(model, b, kappa, lam, config, iterations=state["iters"], method="rck", flags=flags)


# ------------------------------------------------------------- stochastic


def solve_sampled_rck(
    sampler: ReturnSampler,
    n: int,
    lam: float,
    config: Optional[SolverConfig] = None,
    *,
    b0=None,
    kappa0: Optional[float] = None,
) -> SolveReport:
    """RCK bet for a general distribution by primal-dual stochastic gradient.

    With ``config.warm_start`` (and no explicit ``b0``) the iteration starts
    from the quadratic approximation's bet and multiplier, computed from
    ``config.moment_samples`` draws. The returned bet and multiplier are the
    step-weighted running averages; ``flags`` records whether the cash floor
    and the dual cap turned out to be inactive.
    """
    config = config or SolverConfig()
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    kelly._check_sampler(sampler, n)
    if b0 is None and config.warm_start and lam > 0:
        from rckelly import qrck

        moments = qrck.estimate_moments(sampler, config.moment_samples)
        qr = qrck.solve_qrck(moments, lam, config)
        b0 = np.asarray(qr.bet, dtype=float)
        if kappa0 is None:
            kappa0 = qrck.rck_multiplier(qr.kappa, lam)
    b, kappa, b_last, kappa_last, iters = kelly.run_stochastic(
        sampler, n, config, lam=lam, dual=True, b0=b0, kappa0=kappa0 or 0.0
    )
    flags = {
        "eps_valid": bool(b[-1] > config.eps),
        "cap_valid": bool(kappa < config.dual_cap),
        "last_cash": float(b_last[-1]),
        "last_kappa": float(kappa_last),
    }
    return kelly._report_sampled(sampler, b, kappa, lam, config, iterations=iters, method="rck", flags=flags)


# ------------------------------------------------------------ diagnostics


def light_regime_approx(source, b, lam: float, *, count: int = expect.DEFAULT_COUNT, stream: int = expect.HOLDOUT_STREAM):
    """``((1/lam) log E (r^T b)^-lam, -E log(r^T b) + (lam/2) var log(r^T b))``.

    The two agree up to ``O(lam^2)`` as ``lam -> 0``; at ``lam = 0`` both
    entries are ``-E log(r^T b)``.
    """
    R, w = expect.weighted_returns(source, count, stream)
    x = np.log(R @ np.asarray(b, dtype=float))
    mean = float(w @ x)
    if lam == 0:
        return -mean, -mean
    var = float(w @ (x - mean) ** 2)
    # log1p/expm1 keep the small-lam evaluation accurate
    exact = math.log1p(float(w @ np.expm1(-lam * x))) / lam
    return exact, -mean + 0.5 * lam * var
