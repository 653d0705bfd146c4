"""Expectations of bet functionals under a finite model or a sampler.

Finite models give exact probability-weighted sums. Samplers give Monte
Carlo means over ``count`` draws from a dedicated stream, with standard
errors.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import logsumexp

from rckelly.model import FiniteOutcomeModel, ReturnSampler

#: stream ids reserved for evaluation draws; training uses small ids
HOLDOUT_STREAM = 2**32
MOMENT_STREAM = 2**33

DEFAULT_COUNT = 100_000

# a coordinate parked on the cash floor (eps == support_tol) must not count as held
_SUPPORT_SLACK = 1.0 + 1e-9


class Estimate(NamedTuple):
    value: float
    stderr: float


def weighted_returns(source, count: int = DEFAULT_COUNT, stream: int = HOLDOUT_STREAM):
    """``(R, w)``: outcome rows and their weights (summing to one)."""
    if isinstance(source, FiniteOutcomeModel):
        return source.returns, source.probs
    if isinstance(source, ReturnSampler):
        R = source.draw(count, stream)
        return R, np.full(R.shape[0], 1.0 / R.shape[0])
    raise TypeError(f"expected a FiniteOutcomeModel or ReturnSampler, got {type(source).__name__}")


def _mean_se(x, w, exact):
    m = float(w @ x)
    if exact or x.size < 2:
        return Estimate(m, 0.0)
    return Estimate(m, float(np.std(x, ddof=1) / math.sqrt(x.size)))


def _rb(R, b):
    return R @ np.asarray(b, dtype=np.float64)


def growth(source, b, count: int = DEFAULT_COUNT, stream: int = HOLDOUT_STREAM) -> Estimate:
    """``E log(r^T b)``."""
    R, w = weighted_returns(source, count, stream)
    with np.errstate(divide="ignore"):
        lg = np.log(_rb(R, b))
    return _mean_se(lg, w, isinstance(source, FiniteOutcomeModel))


def log_risk(R, w, b, lam: float) -> float:
    """``log E (r^T b)^(-lam)`` evaluated as a log-sum-exp."""
    if lam == 0:
        return 0.0
    with np.errstate(divide="ignore"):
        lrb = np.log(_rb(R, b))
    with np.errstate(divide="ignore"):
        return float(logsumexp(np.log(w) - lam * lrb))


def estimate_risk(source, b, lam: float, count: int = DEFAULT_COUNT, stream: int = HOLDOUT_STREAM) -> Estimate:
    """``E (r^T b)^(-lam)``; an outcome with ``r^T b = 0`` makes it ``inf``."""
    R, w = weighted_returns(source, count, stream)
    if lam == 0:
        return Estimate(1.0, 0.0)
    with np.errstate(divide="ignore", over="ignore"):
        terms = np.exp(-lam * np.log(_rb(R, b)))
    if isinstance(source, FiniteOutcomeModel):
        lr = log_risk(R, w, b, lam)
        return Estimate(math.exp(lr) if lr < 709.0 else math.inf, 0.0)
    if not np.all(np.isfinite(terms)):
        return Estimate(math.inf, math.inf)
    return _mean_se(terms, w, False)


@dataclass(frozen=True)
class Residuals:
    """Violations of the risk-constrained optimality conditions.

    ``feasibility`` is ``max(E(r^T b)^-lam - 1, 0)``, ``slackness`` is
    ``|kappa (E(r^T b)^-lam - 1)|`` and ``stationarity`` is the worst
    deviation of ``E[r_i / r^T b] + kappa lam E[r_i / (r^T b)^(lam+1)]`` from
    ``1 + kappa lam`` (equality where ``b_i`` is held, ``<=`` elsewhere).
    """

    feasibility: float
    slackness: float
    stationarity: float
    risk_value: float
    #: Monte Carlo standard errors of the three residuals (zero when exact)
    stderr: tuple = (0.0, 0.0, 0.0)

    @property
    def max(self) -> float:
        return max(self.feasibility, self.slackness, self.stationarity)

    def as_dict(self) -> dict:
        return {
            "feasibility": self.feasibility,
            "slackness": self.slackness,
            "stationarity": self.stationarity,
        }

    def within(self, tol: float, sigmas: float = 0.0) -> bool:
        """Every residual is at most ``tol`` plus ``sigmas`` standard errors."""
        vals = (self.feasibility, self.slackness, self.stationarity)
        return all(v <= tol + sigmas * se for v, se in zip(vals, self.stderr))


def _nan_to_inf(x: float) -> float:
    return math.inf if math.isnan(x) else float(x)


def _stationarity_coef(R, b, kappa, lam):
    rb = _rb(R, b)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        coef = 1.0 / rb
        if kappa * lam != 0:
            coef = coef + kappa * lam * np.exp(-(lam + 1.0) * np.log(rb))
    return coef


def stationarity_terms(R, w, b, kappa: float, lam: float) -> np.ndarray:
    """``E[r / r^T b] + kappa lam E[r / (r^T b)^(lam+1)]`` per coordinate."""
    with np.errstate(invalid="ignore", over="ignore"):
        return (w * _stationarity_coef(R, b, kappa, lam)) @ R


def optimality_residual(
    source,
    b,
    kappa: float,
    lam: float,
    *,
    support_tol: float = 1e-6,
    count: int = DEFAULT_COUNT,
    stream: int = HOLDOUT_STREAM,
) -> Residuals:
    """Check a candidate ``(b, kappa)`` against the optimality conditions.

    For a sampler the expectations are hold-out means and ``stderr`` carries
    their standard errors; the stationarity error is the largest over the
    coordinates.
    """
    if kappa < 0:
        raise ValueError("kappa must be nonnegative")
    R, w = weighted_returns(source, count, stream)
    exact = isinstance(source, FiniteOutcomeModel)
    b = np.asarray(b, dtype=np.float64)
    risk_se = 0.0
    if lam == 0:
        risk = 1.0
    else:
        lr = log_risk(R, w, b, lam)
        risk = math.exp(lr) if lr < 709.0 else math.inf
        if not exact:
            risk_se = estimate_risk(source, b, lam, count, stream).stderr
    feas = max(risk - 1.0, 0.0)
    slack = abs(kappa * (risk - 1.0)) if kappa else 0.0
    coef = _stationarity_coef(R, b, kappa, lam)
    with np.errstate(invalid="ignore", over="ignore"):
        g = (w * coef) @ R
    level = 1.0 + kappa * lam
    stat_se = 0.0
    if not np.all(np.isfinite(g)):
        stat = math.inf
    else:
        held = b > support_tol * _SUPPORT_SLACK
        on = np.abs(g[held] - level).max(initial=0.0)
        off = np.maximum(g[~held] - level, 0.0).max(initial=0.0)
        stat = float(max(on, off))
        if not exact and R.shape[0] > 1:
            stat_se = float(np.max(np.std(coef[:, None] * R, axis=0, ddof=1)) / math.sqrt(R.shape[0]))
    se = (risk_se, kappa * risk_se, stat_se)
    return Residuals(_nan_to_inf(feas), _nan_to_inf(slack), _nan_to_inf(stat), risk, se)
