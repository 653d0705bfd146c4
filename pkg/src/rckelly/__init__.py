"""Kelly and risk-constrained Kelly gambling with drawdown certificates."""
from rckelly._accel import backend
from rckelly.instances import gen_finite, gen_lognormal_mixture, gen_two_outcome
from rckelly.kelly import detect_no_bet, solve_finite, solve_sampled, solve_two_outcome
from rckelly.model import (
    BetVector,
    FiniteOutcomeModel,
    FiniteSampler,
    ReturnSampler,
    RiskSpec,
    SolveReport,
    SolverConfig,
    cdf_bound,
    fractional_kelly,
    lambda_from_alpha_beta,
    load_problem,
    save_problem,
)
from rckelly.montecarlo import SimulationPlan, TrajectoryStats, frontier, simulate, simulate_many, validate_bound
from rckelly.qrck import MomentEstimate, estimate_moments, markowitz_gamma_of_qrck, solve_markowitz, solve_qrck
from rckelly.rck import certify, light_regime_approx, optimality_residual, risk_value, solve_finite_rck, solve_sampled_rck, solve_two_outcome_rck
from rckelly.simplex import TruncatedSimplex, project

__version__ = "0.1.0"

__all__ = [
    "BetVector",
    "FiniteOutcomeModel",
    "FiniteSampler",
    "MomentEstimate",
    "ReturnSampler",
    "RiskSpec",
    "SimulationPlan",
    "SolveReport",
    "SolverConfig",
    "TrajectoryStats",
    "TruncatedSimplex",
    "backend",
    "cdf_bound",
    "certify",
    "detect_no_bet",
    "estimate_moments",
    "fractional_kelly",
    "frontier",
    "gen_finite",
    "gen_lognormal_mixture",
    "gen_two_outcome",
    "lambda_from_alpha_beta",
    "light_regime_approx",
    "load_problem",
    "markowitz_gamma_of_qrck",
    "optimality_residual",
    "project",
    "risk_value",
    "save_problem",
    "simulate",
    "simulate_many",
    "solve_finite",
    "solve_finite_rck",
    "solve_markowitz",
    "solve_qrck",
    "solve_sampled",
    "solve_sampled_rck",
    "solve_two_outcome",
    "solve_two_outcome_rck",
    "validate_bound",
]
