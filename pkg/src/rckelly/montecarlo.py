"""Monte Carlo wealth trajectories and drawdown risk.

Trajectory ``k`` of a plan draws its returns from substream
``stream_offset + k`` of ``plan.seed``, so any trajectory can be regenerated
on its own and the statistics do not depend on how work is split across
threads. All bets passed to :func:`simulate_many` see the same return draws.
"""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from rckelly import kernels
from rckelly._accel import backend
from rckelly.model import (
    RNG_SCHEME,
    BetVector,
    FiniteOutcomeModel,
    FiniteSampler,
    ReturnSampler,
    cdf_bound,
    fractional_kelly,
)

__all__ = [
    "BoundCheck",
    "FrontierRow",
    "SimulationPlan",
    "TrajectoryStats",
    "binomial_se",
    "frontier",
    "frontier_csv",
    "simulate",
    "simulate_many",
    "validate_bound",
]

DEFAULT_ALPHAS = (0.5, 0.6, 0.7, 0.8, 0.9)
BLOCK = 500


@dataclass(frozen=True)
class SimulationPlan:
    trajectories: int = 10_000
    horizon: int = 100
    alpha_grid: tuple = DEFAULT_ALPHAS
    seed: int = 0
    stream_offset: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.trajectories < 1 or self.horizon < 1:
            raise ValueError("trajectories and horizon must be at least 1")
        if not all(0.0 < a < 1.0 for a in self.alpha_grid):
            raise ValueError("thresholds must lie in (0, 1)")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")
        object.__setattr__(self, "alpha_grid", tuple(float(a) for a in self.alpha_grid))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["alpha_grid"] = list(self.alpha_grid)
        d.pop("threads")  # results do not depend on it
        return d


def binomial_se(p: float, count: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / count)


@dataclass
class TrajectoryStats:
    """Per-trajectory minimum and final log wealth, plus derived summaries.

    ``wmin_samples[k]`` is the minimum of ``w_1 = 1, w_2, ..., w_T``.
    """

    wmin_samples: np.ndarray
    final_log_wealth: np.ndarray
    horizon: int
    alpha_grid: tuple
    metadata: dict = field(default_factory=dict)

    @property
    def count(self) -> int:
        return self.wmin_samples.size

    def risk(self, alpha: float) -> float:
        """Empirical ``Prob(W_min < alpha)`` (strict inequality)."""
        return float(np.mean(self.wmin_samples < alpha))

    @property
    def drawdown_risk(self) -> dict:
        return {a: (p, binomial_se(p, self.count)) for a in self.alpha_grid for p in [self.risk(a)]}

    @property
    def growth_estimate(self) -> tuple:
        periods = max(self.horizon - 1, 1)
        g = self.final_log_wealth / periods
        se = float(np.std(g, ddof=1) / math.sqrt(g.size)) if g.size > 1 else 0.0
        return float(np.mean(g)), se

    @property
    def cdf(self) -> np.ndarray:
        return np.sort(self.wmin_samples)

    def cdf_at(self, alpha) -> np.ndarray:
        """Sample CDF ``alpha -> Prob(W_min < alpha)`` on an array of thresholds."""
        return np.searchsorted(self.cdf, np.asarray(alpha, dtype=float), side="left") / self.count

    def summary(self) -> dict:
        g, gse = self.growth_estimate
        return {
            "trajectories": self.count,
            "horizon": self.horizon,
            "drawdown_risk": {repr(a): {"risk": p, "stderr": se} for a, (p, se) in self.drawdown_risk.items()},
            "growth": g,
            "growth_stderr": gse,
            "metadata": self.metadata,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "wmin", "final_log_wealth"])
        for k, (a, b) in enumerate(zip(self.wmin_samples, self.final_log_wealth)):
            w.writerow([k, repr(float(a)), repr(float(b))])
        return buf.getvalue()

    def summary_json(self) -> str:
        return json.dumps(self.summary(), indent=1, sort_keys=True) + "\n"


def _block_returns(source, bets, plan: SimulationPlan, start: int, stop: int):
    """Per-period ``r^T b`` for trajectories ``start..stop`` and every bet."""
    steps = plan.horizon - 1
    out = [np.empty((stop - start, steps)) for _ in bets]
    if isinstance(source, FiniteSampler):
        per_outcome = [source.model.returns @ b for b in bets]
        for k in range(start, stop):
            idx = source.draw_indices(steps, plan.stream_offset + k)
            for o, v in zip(out, per_outcome):
                o[k - start] = v[idx]
    else:
        for k in range(start, stop):
            R = source.draw(steps, plan.stream_offset + k)
            for o, b in zip(out, bets):
                o[k - start] = R @ b
    return out


def simulate_many(source, bets: Sequence, plan: SimulationPlan) -> list:
    """Simulate every bet in ``bets`` on the same return draws."""
    if isinstance(source, FiniteOutcomeModel):
        sampler = FiniteSampler(source, plan.seed)
    elif isinstance(source, ReturnSampler):
        sampler = source.reseeded(plan.seed)
    else:
        raise TypeError("expected a FiniteOutcomeModel or ReturnSampler")
    bets = [np.asarray(BetVector(b), dtype=float) for b in bets]
    for b in bets:
        if b.size != sampler.n:
            raise ValueError(f"bet has {b.size} entries, distribution has {sampler.n}")
    N = plan.trajectories
    blocks = [(s, min(s + BLOCK, N)) for s in range(0, N, BLOCK)]

    def run(block):
        rbs = _block_returns(sampler, bets, plan, *block)
        return [kernels.wealth_paths(rb) for rb in rbs]

    if plan.threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=plan.threads) as pool:
            results = list(pool.map(run, blocks))
    else:
        results = [run(b) for b in blocks]
    meta = {"plan": plan.to_dict(), "rng": RNG_SCHEME, "source": sampler.describe(), "backend": backend()}
    stats = []
    for j, b in enumerate(bets):
        wmin = np.concatenate([r[j][0] for r in results])
        final = np.concatenate([r[j][1] for r in results])
        stats.append(TrajectoryStats(wmin, final, plan.horizon, plan.alpha_grid, dict(meta, bet=b.tolist())))
    return stats


def simulate(source, b, plan: SimulationPlan) -> TrajectoryStats:
    """Simulate ``plan.trajectories`` wealth paths of length ``plan.horizon``."""
    return simulate_many(source, [b], plan)[0]


@dataclass(frozen=True)
class BoundCheck:
    alpha: float
    empirical: float
    stderr: float
    bound: float
    margin: float
    ok: bool


def validate_bound(stats: TrajectoryStats, lam: float, alphas: Optional[Sequence[float]] = None, sigmas: float = 3.0):
    """Compare empirical drawdown risk with ``alpha**lam`` at each threshold.

    ``margin`` is ``bound - empirical``; ``ok`` allows ``sigmas`` binomial
    standard errors of Monte Carlo noise. Violations are returned, not raised.
    """
    checks = []
    for a in alphas or stats.alpha_grid:
        p = stats.risk(a)
        se = binomial_se(p, stats.count)
        bound = cdf_bound(lam, a)
        checks.append(BoundCheck(a, p, se, bound, bound - p, p < bound + sigmas * se or p == 0.0))
    return checks


# ---------------------------------------------------------------- frontier


@dataclass(frozen=True)
class FrontierRow:
    method: str
    param: float
    growth: float
    risk: float
    bound: float
    stderr: float
    converged: bool = True


def frontier(source, lambdas, fractions, plan: SimulationPlan, config=None, *, alpha: float = 0.7):
    """Growth versus drawdown risk at ``alpha`` for RCK, QRCK and fractional Kelly.

    Every bet is simulated on the same draws. Solver non-convergence is kept
    in the ``converged`` column rather than raised. Rows are sorted by risk.
    """
    from rckelly import kelly, qrck, rck
    from rckelly.model import SolverConfig

    config = config or SolverConfig()
    if not lambdas and not fractions:
        raise ValueError("need at least one lambda or fraction")
    finite = isinstance(source, FiniteOutcomeModel)
    specs = []  # (method, param, bet, bound, converged)
    moments = None
    for lam in lambdas:
        lam = float(lam)
        if finite:
            rep = rck.solve_finite_rck(source, lam, config)
        else:
            rep = rck.solve_sampled_rck(source, source.n, lam, config)
        specs.append(("rck", lam, rep.bet, cdf_bound(lam, alpha), rep.converged))
        if moments is None:
            moments = qrck.estimate_moments(source, config.moment_samples)
        qrep = qrck.solve_qrck(moments, lam, config)
        specs.append(("qrck", lam, qrep.bet, cdf_bound(lam, alpha), qrep.converged))
    if fractions:
        krep = kelly.solve_finite(source, config) if finite else kelly.solve_sampled(source, source.n, config)
        for f in fractions:
            specs.append(("fractional", float(f), fractional_kelly(krep.bet, float(f)), math.nan, krep.converged))
    plan = SimulationPlan(plan.trajectories, plan.horizon, (alpha,), plan.seed, plan.stream_offset, plan.threads)
    stats = simulate_many(source, [s[2] for s in specs], plan)
    rows = []
    for (method, param, _, bound, conv), st in zip(specs, stats):
        p = st.risk(alpha)
        rows.append(FrontierRow(method, param, st.growth_estimate[0], p, bound, binomial_se(p, st.count), bool(conv)))
    rows.sort(key=lambda r: (r.risk, r.growth, r.method, r.param))
    return rows


def frontier_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["method", "param", "growth", "risk", "bound", "stderr", "converged"])
    for r in rows:
        w.writerow([r.method, repr(r.param), repr(r.growth), repr(r.risk), repr(r.bound), repr(r.stderr), int(r.converged)])
    return buf.getvalue()
