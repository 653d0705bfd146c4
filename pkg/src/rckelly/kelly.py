"""Growth-optimal (Kelly) bets."""
from __future__ import annotations

import math
from typing import Optional

import numpy as np

from rckelly import _firstorder, expect, kernels
from rckelly.model import BetVector, FiniteOutcomeModel, ReturnSampler, SolveReport, SolverConfig

__all__ = [
    "detect_no_bet",
    "finite_gradient",
    "run_stochastic",
    "solve_finite",
    "solve_sampled",
    "solve_two_outcome",
    "step_size",
]

#: iterations of the stochastic method drawn per sampler stream
CHUNK = 100
#: standard errors of hold-out noise tolerated by the sampled convergence test
NOISE_SIGMAS = 3.0


def _check_two_outcome(pi: float, P: float) -> None:
    if not 0.0 < pi < 1.0:
        raise ValueError(f"win probability must lie in (0, 1), got {pi}")
    if not P > 1.0:
        raise ValueError(f"payoff must exceed 1, got {P}")


def solve_two_outcome(pi: float, P: float) -> BetVector:
    """Kelly bet for a wager paying ``P`` w.p. ``pi`` and nothing otherwise."""
    _check_two_outcome(pi, P)
    if pi * P <= 1.0:
        return BetVector([0.0, 1.0])
    b1 = (pi * P - 1.0) / (P - 1.0)
    return BetVector([b1, 1.0 - b1])


def detect_no_bet(model: FiniteOutcomeModel) -> bool:
    """True iff no risky bet beats cash in expectation, so ``e_n`` is optimal."""
    return bool(np.all(model.mean_returns()[:-1] <= 1.0))


def finite_gradient(model: FiniteOutcomeModel, b) -> np.ndarray:
    """Exact gradient ``sum_i pi_i r_i / (r_i^T b)`` of the growth rate."""
    rb = model.returns @ np.asarray(b, dtype=float)
    return (model.probs / rb) @ model.returns


def step_size(k, C: float):
    """Step ``C / sqrt(k)`` of the stochastic methods (``k`` starts at 1)."""
    return C / np.sqrt(k)


def _growth_objective(model: FiniteOutcomeModel):
    R, p = model.returns, model.probs

    def fun_grad(b):
        rb = R @ b
        return -float(p @ np.log(rb)), -((p / rb) @ R)

    return fun_grad


def _report_finite(model, b, kappa, lam, config, *, iterations, method, flags):
    res = expect.optimality_residual(model, b, kappa, lam, support_tol=config.support_tol)
    converged = res.max <= config.kkt_tol and res.risk_value <= 1.0 + config.kkt_tol
    return SolveReport(
        bet=BetVector(b),
        kappa=float(kappa),
        growth=model.growth(b),
        risk_value=res.risk_value,
        kkt_residual=res.max,
        residuals=res.as_dict(),
        iterations=iterations,
        converged=bool(converged),
        lam=float(lam),
        method=method,
        flags=flags,
    )


def solve_finite(model: FiniteOutcomeModel, config: Optional[SolverConfig] = None) -> SolveReport:
    """Maximize ``sum_i pi_i log(r_i^T b)`` over bets with cash at least ``eps``.

    Uses exact gradients with an accelerated projected-gradient iteration and
    stops on the optimality residual; a non-converged solve is flagged, not
    raised.
    """
    config = config or SolverConfig()
    n = model.n
    if detect_no_bet(model):
        b = BetVector.cash(n).weights.copy()
        return _report_finite(model, b, 0.0, 0.0, config, iterations=0, method="kelly", flags={"no_bet": True})
    x0 = np.full(n, 1.0 / n)
    fo = _firstorder.minimize(
        _growth_objective(model),
        x0,
        config.eps,
        tol=0.1 * config.kkt_tol,
        support_tol=config.support_tol,
    )
    b = fo.x / fo.x.sum()
    flags = {"no_bet": False, "cash_floor_active": bool(b[-1] <= config.eps * (1 + 1e-9))}
    return _report_finite(model, b, 0.0, 0.0, config, iterations=fo.iterations, method="kelly", flags=flags)


# ------------------------------------------------------------- stochastic


def _check_sampler(sampler: ReturnSampler, n: int) -> None:
    if not isinstance(sampler, ReturnSampler):
        raise TypeError("expected a ReturnSampler")
    if sampler.n != n:
        raise ValueError(f"sampler emits dimension {sampler.n}, expected {n}")


def run_stochastic(sampler, n, config, *, lam=0.0, dual=False, b0=None, kappa0=0.0):
    """Projected (primal-dual) stochastic gradient method with averaging.

    Returns ``(b_avg, kappa_avg, b_last, kappa_last, iterations)``. Iteration
    ``k`` uses a fresh batch of ``config.batch_size`` draws; the draws for
    iterations ``100 c + 1 .. 100 (c + 1)`` come from sampler stream ``c``.
    """
    if b0 is None:
        b0 = np.full(n, 1.0 / n)
    b_bar = kernels.project(np.asarray(b0, dtype=float), config.eps)[0]
    kappa = float(min(max(kappa0, 0.0), config.dual_cap))
    acc_b = np.zeros(n)
    acc = np.zeros(2)
    batch = config.batch_size
    k = 1
    chunk_id = 0
    while k <= config.max_iters:
        m = min(CHUNK, config.max_iters - k + 1)
        samples = sampler.draw(m * batch, chunk_id).reshape(m, batch, n)
        kappa = kernels.sgd_chunk(
            samples, b_bar, kappa, k, config.step_constant, lam, config.eps, config.dual_cap, dual, acc_b, acc
        )
        k += m
        chunk_id += 1
    b_avg = acc_b / acc[0]
    b_avg = b_avg / b_avg.sum()
    return b_avg, acc[1] / acc[0], b_bar.copy(), kappa, k - 1


def _report_sampled(sampler, b, kappa, lam, config, *, iterations, method, flags):
    count = config.holdout_samples
    g = expect.growth(sampler, b, count)
    rv = expect.estimate_risk(sampler, b, lam, count)
    res = expect.optimality_residual(sampler, b, kappa, lam, support_tol=config.support_tol, count=count)
    valid = all(v for k, v in flags.items() if k.endswith("_valid"))
    tol = config.sampled_kkt_tol
    # hold-out estimates carry Monte Carlo error; allow NOISE_SIGMAS of it
    converged = valid and res.within(tol, NOISE_SIGMAS) and rv.value <= 1.0 + tol + NOISE_SIGMAS * rv.stderr
    return SolveReport(
        bet=BetVector(b),
        kappa=float(kappa),
        growth=g.value,
        risk_value=rv.value,
        kkt_residual=res.max,
        residuals=res.as_dict(),
        iterations=iterations,
        converged=bool(converged),
        lam=float(lam),
        method=method,
        flags=flags,
        stderr={"growth": g.stderr, "risk_value": rv.stderr, "residuals": list(res.stderr)},
    )


def solve_sampled(
    sampler: ReturnSampler, n: int, config: Optional[SolverConfig] = None, *, b0=None
) -> SolveReport:
    """Kelly bet for a general return distribution by stochastic gradient.

    Growth and the optimality residual are estimated on a hold-out batch
    drawn from a stream the training iterations never touch. With
    ``config.warm_start`` (and no ``b0``) iteration starts from the
    unconstrained quadratic approximation's bet.
    """
    config = config or SolverConfig()
    _check_sampler(sampler, n)
    if b0 is None and config.warm_start:
        from rckelly import qrck

        moments = qrck.estimate_moments(sampler, config.moment_samples)
        b0 = np.asarray(qrck.solve_qrck(moments, 0.0, config).bet, dtype=float)
    b, _, b_last, _, iters = run_stochastic(sampler, n, config, b0=b0)
    flags = {"eps_valid": bool(b[-1] > config.eps), "last_cash": float(b_last[-1])}
    return _report_sampled(sampler, b, 0.0, 0.0, config, iterations=iters, method="kelly", flags=flags)
