"""Quadratic approximation of RCK and its Markowitz equivalent.

With excess return ``rho = r - 1``, ``mu = E rho`` and ``S = E rho rho^T``,
the quadratic RCK problem is

    maximize    mu^T b - (1/2) b^T S b
    subject to  (lam + 1)/2 b^T S b - mu^T b <= 0,   b on the simplex,

the risk constraint being divided through by ``lam > 0``. Its multiplier
``nu`` maps the solution to a Markowitz portfolio with risk aversion
``gamma = eta / (1 - eta mu^T b)``, ``eta = (1 + nu (lam + 1)) / (1 + nu)``.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from rckelly import _firstorder, expect
from rckelly.model import BetVector, FiniteOutcomeModel, ReturnSampler, SolveReport, SolverConfig

__all__ = [
    "MomentEstimate",
    "NoArbitrageViolation",
    "estimate_moments",
    "markowitz_gamma_of_qrck",
    "markowitz_report",
    "qrck_objective",
    "rck_multiplier",
    "solve_markowitz",
    "solve_qrck",
]

log = logging.getLogger(__name__)

_CHUNK = 100_000
_INNER = 1e-4


class NoArbitrageViolation(ValueError):
    """The QRCK bet cannot be mapped to a finite Markowitz risk aversion."""


@dataclass(frozen=True, eq=False)
class MomentEstimate:
    """First and second moments of the excess return ``rho = r - 1``."""

    mu: np.ndarray
    S: np.ndarray
    Sigma: np.ndarray
    sample_count: int

    @property
    def n(self) -> int:
        return self.mu.size

    @classmethod
    def from_mean_cov(cls, mu, Sigma, sample_count: int = 0) -> "MomentEstimate":
        mu = np.array(mu, dtype=float)
        Sigma = np.array(Sigma, dtype=float)
        Sigma = 0.5 * (Sigma + Sigma.T)
        return cls(mu, Sigma + np.outer(mu, mu), Sigma, int(sample_count))

    def to_dict(self) -> dict:
        return {"mu": self.mu.tolist(), "Sigma": self.Sigma.reshape(-1).tolist(), "sample_count": self.sample_count}

    @classmethod
    def from_dict(cls, d: dict) -> "MomentEstimate":
        mu = np.asarray(d["mu"], dtype=float)
        n = mu.size
        return cls.from_mean_cov(mu, np.asarray(d["Sigma"], dtype=float).reshape(n, n), d.get("sample_count", 0))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path) -> "MomentEstimate":
        return cls.from_dict(json.loads(Path(path).read_text()))


def estimate_moments(source, sample_count: int = 1_000_000) -> MomentEstimate:
    """Exact moments of a finite model, or sample moments from a sampler.

    Sampler draws come from dedicated streams, in chunks merged in a fixed
    order, so the estimate is reproducible.
    """
    if isinstance(source, FiniteOutcomeModel):
        rho = source.returns - 1.0
        p = source.probs
        mu = p @ rho
        c = rho - mu
        Sigma = (c * p[:, None]).T @ c
        return MomentEstimate.from_mean_cov(mu, Sigma, 0)
    if not isinstance(source, ReturnSampler):
        raise TypeError("expected a FiniteOutcomeModel or ReturnSampler")
    if sample_count < 2:
        raise ValueError("need at least two samples")
    n = source.n
    count, mean, M2 = 0, np.zeros(n), np.zeros((n, n))
    for j, start in enumerate(range(0, sample_count, _CHUNK)):
        m = min(_CHUNK, sample_count - start)
        rho = source.draw(m, expect.MOMENT_STREAM + j) - 1.0
        cm = rho.mean(axis=0)
        c = rho - cm
        cM2 = c.T @ c
        # pairwise merge of (count, mean, centered second moment)
        delta = cm - mean
        tot = count + m
        mean = mean + delta * (m / tot)
        M2 = M2 + cM2 + np.outer(delta, delta) * (count * m / tot)
        count = tot
    return MomentEstimate.from_mean_cov(mean, M2 / count, count)


def qrck_objective(moments: MomentEstimate, b) -> float:
    b = np.asarray(b, dtype=float)
    return float(moments.mu @ b - 0.5 * b @ moments.S @ b)


def _constraint(moments: MomentEstimate, lam: float, b) -> float:
    """``(lam + 1)/2 b^T S b - mu^T b`` (the risk constraint over ``lam``)."""
    return float(0.5 * (lam + 1.0) * (b @ moments.S @ b) - moments.mu @ b)


def _quadratic(mu, Q):
    """``-mu^T b + (1/2) b^T Q b`` and its gradient."""

    def fun_grad(b):
        Qb = Q @ b
        return float(-mu @ b + 0.5 * b @ Qb), Qb - mu

    return fun_grad


def _lmax(Q) -> float:
    return float(max(np.linalg.eigvalsh(0.5 * (Q + Q.T))[-1], 0.0))


def _linear_argmax(mu) -> np.ndarray:
    b = np.zeros(mu.size)
    top = mu.max()
    # ties go to cash, then to the lowest index
    b[mu.size - 1 if mu[-1] >= top else int(np.argmax(mu))] = 1.0
    return b


def _solve_quadratic(mu, Q, config, x0, tol):
    L = _lmax(Q)
    if L <= 1e-300:
        return _linear_argmax(mu), 0, True
    fo = _firstorder.minimize(_quadratic(mu, Q), x0, 0.0, tol=tol, support_tol=config.support_tol, lipschitz=L)
    return fo.x / fo.x.sum(), fo.iterations, fo.converged


def _cash(n):
    b = np.zeros(n)
    b[-1] = 1.0
    return b


def solve_qrck(moments: MomentEstimate, lam: float, config: Optional[SolverConfig] = None) -> SolveReport:
    """Solve the quadratic RCK problem; ``report.kappa`` is the multiplier ``nu``.

    For a fixed ``nu`` the Lagrangian maximizer depends only on
    ``eta = (1 + nu (lam + 1)) / (1 + nu)``, which ranges over ``[1, lam + 1)``;
    the active-constraint case finds ``eta`` by Brent's method. A constant
    objective (``mu = 0`` and ``S = 0``) returns all cash.
    """
    config = config or SolverConfig()
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    mu, S = moments.mu, moments.S
    n = moments.n
    tol = _INNER * config.kkt_tol
    flags = {"constraint_active": False, "dual_cap_hit": False}
    if not (np.any(mu) or np.any(S)):
        b = _cash(n)
        return _qrck_report(moments, lam, b, 0.0, config, 0, True, flags)

    state = {"b": _cash(n), "iters": 0, "ok": True}

    def solve_eta(eta, tol=tol):
        b, it, ok = _solve_quadratic(mu, eta * S, config, state["b"], tol)
        state.update(b=b, iters=state["iters"] + it, ok=ok)
        return b

    b = solve_eta(1.0)
    if lam == 0 or _constraint(moments, lam, b) <= 0.0:
        return _qrck_report(moments, lam, b, 0.0, config, state["iters"], state["ok"], flags)

    flags["constraint_active"] = True
    top = lam + 1.0
    b_top = solve_eta(top)
    if _constraint(moments, lam, b_top) >= 0.0:
        # no strictly feasible direction: the constraint pins the bet at cash
        b = _cash(n)
        nu = config.dual_cap
        flags["dual_cap_hit"] = True
        return _qrck_report(moments, lam, b, nu, config, state["iters"], state["ok"], flags)
    eta = brentq(
        lambda e: _constraint(moments, lam, solve_eta(e)), 1.0, top, xtol=1e-15, rtol=4 * np.finfo(float).eps
    )
    b = solve_eta(eta, 0.1 * tol)
    nu = (eta - 1.0) / (top - eta)
    flags["dual_cap_hit"] = bool(nu >= config.dual_cap)
    return _qrck_report(moments, lam, b, nu, config, state["iters"], state["ok"], flags)


def _qrck_report(moments, lam, b, nu, config, iters, inner_ok, flags):
    mu, S = moments.mu, moments.S
    g = _constraint(moments, lam, b) if lam > 0 else 0.0
    ascent = (1.0 + nu) * mu - (1.0 + nu * (lam + 1.0)) * (S @ b)
    stat = _firstorder.simplex_stationarity(ascent, b, config.support_tol)
    res = {"feasibility": max(g, 0.0), "slackness": abs(nu * g), "stationarity": stat}
    kkt = max(res.values())
    return SolveReport(
        bet=BetVector(b),
        kappa=float(nu),
        growth=qrck_objective(moments, b),
        risk_value=1.0 + lam * g,
        kkt_residual=kkt,
        residuals=res,
        iterations=iters,
        converged=bool(kkt <= config.kkt_tol),
        lam=float(lam),
        method="qrck",
        flags=dict(flags, inner_converged=bool(inner_ok)),
    )


def rck_multiplier(nu: float, lam: float) -> float:
    """Multiplier of the undivided constraint ``E (r^T b)^-lam <= 1`` from ``nu``."""
    return nu / lam if lam > 0 else 0.0


def markowitz_report(moments: MomentEstimate, gamma: float, config: Optional[SolverConfig] = None) -> SolveReport:
    """Solve ``max mu^T b - (gamma/2) b^T Sigma b`` on the simplex, with diagnostics."""
    config = config or SolverConfig()
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    mu = moments.mu
    b, iters, ok = _solve_quadratic(mu, gamma * moments.Sigma, config, _cash(moments.n), _INNER * config.kkt_tol)
    ascent = mu - gamma * (moments.Sigma @ b)
    stat = _firstorder.simplex_stationarity(ascent, b, config.support_tol)
    return SolveReport(
        bet=BetVector(b),
        growth=float(mu @ b - 0.5 * gamma * b @ moments.Sigma @ b),
        kkt_residual=stat,
        residuals={"stationarity": stat},
        iterations=iters,
        converged=bool(stat <= config.kkt_tol),
        method="markowitz",
        flags={"gamma": float(gamma)},
    )


def solve_markowitz(moments: MomentEstimate, gamma: float, config: Optional[SolverConfig] = None) -> BetVector:
    """Long-only Markowitz portfolio for risk aversion ``gamma``."""
    rep = markowitz_report(moments, gamma, config)
    if not rep.converged:
        log.warning("Markowitz solve stopped with stationarity residual %.3g", rep.kkt_residual)
    return rep.bet


def markowitz_gamma_of_qrck(qrck_report: SolveReport, moments: MomentEstimate, *, tol: float = 1e-9) -> float:
    """Risk aversion at which the Markowitz portfolio equals the QRCK bet.

    Raises :class:`NoArbitrageViolation` when ``1 - eta mu^T b`` is not
    positive (to within ``tol``), which no-arbitrage rules out.
    """
    nu = float(qrck_report.kappa)
    lam = float(qrck_report.lam)
    eta = (1.0 + nu * (lam + 1.0)) / (1.0 + nu)
    gain = float(moments.mu @ np.asarray(qrck_report.bet, dtype=float))
    denom = 1.0 - eta * gain
    if denom <= tol:
        raise NoArbitrageViolation(
            f"mu^T b = {gain:.6g} is not below 1/eta = {1.0 / eta:.6g}; the moments admit an arbitrage"
        )
    return eta / denom
