"""Distributions, bets, risk parameters and solver reports."""
from __future__ import annotations

import json
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Union

import numpy as np

__all__ = [
    "BetVector",
    "FiniteOutcomeModel",
    "FiniteSampler",
    "ReturnSampler",
    "RiskSpec",
    "SolveReport",
    "SolverConfig",
    "as_sampler",
    "cdf_bound",
    "fractional_kelly",
    "lambda_from_alpha_beta",
    "load_problem",
    "rng_for",
    "save_problem",
]

#: RNG recipe recorded in output metadata. Change only with a version bump.
RNG_SCHEME = "numpy.PCG64(SeedSequence(entropy=seed, spawn_key=(stream,)))"

PROB_TOL = 1e-12
BET_TOL = 1e-9
CASH_TOL = 1e-12


def rng_for(seed: int, stream: int) -> np.random.Generator:
    """Deterministic generator for substream ``stream`` of ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(int(stream),))))


# -------------------------------------------------------------------- bets


class BetVector:
    """Fractions of wealth placed on each of ``n`` bets; the last one is cash."""

    __slots__ = ("_b",)

    def __init__(self, weights, *, tol: float = BET_TOL):
        b = np.array(weights, dtype=np.float64).reshape(-1)
        if b.size < 2:
            raise ValueError("a bet needs at least two entries (one risky, one cash)")
        if not np.all(np.isfinite(b)):
            raise ValueError("bet contains non-finite entries")
        if b.min() < 0.0:
            raise ValueError(f"bet has negative entries (min {b.min():.3g})")
        if abs(b.sum() - 1.0) > tol:
            raise ValueError(f"bet sums to {b.sum():.12g}, not 1")
        b.setflags(write=False)
        self._b = b

    @classmethod
    def cash(cls, n: int) -> "BetVector":
        b = np.zeros(n)
        b[-1] = 1.0
        return cls(b)

    @property
    def weights(self) -> np.ndarray:
        return self._b

    @property
    def n(self) -> int:
        return self._b.size

    @property
    def cash_fraction(self) -> float:
        return float(self._b[-1])

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self._b
        return self._b.astype(dtype)

    def __len__(self):
        return self._b.size

    def __getitem__(self, idx):
        return self._b[idx]

    def __iter__(self):
        return iter(self._b)

    def __eq__(self, other):
        if not isinstance(other, BetVector):
            return NotImplemented
        return np.array_equal(self._b, other._b)

    def __hash__(self):
        return hash(self._b.tobytes())

    def __repr__(self):
        return f"BetVector({np.array2string(self._b, precision=6, separator=', ')})"

    def tolist(self) -> list:
        return self._b.tolist()


def fractional_kelly(kelly_bet, f: float) -> BetVector:
    """The bet ``f * b + (1 - f) * e_n``."""
    if not 0.0 <= f <= 1.0:
        raise ValueError(f"fraction must lie in [0, 1], got {f}")
    b = np.asarray(kelly_bet, dtype=np.float64)
    out = f * b
    out[-1] += 1.0 - f
    return BetVector(out)


# ----------------------------------------------------------- risk parameters


def lambda_from_alpha_beta(alpha: float, beta: float) -> float:
    """Risk-aversion parameter ``log(beta) / log(alpha)``."""
    if not (0.0 < alpha < 1.0 and 0.0 < beta < 1.0):
        raise ValueError(f"alpha and beta must lie in (0, 1), got ({alpha}, {beta})")
    return math.log(beta) / math.log(alpha)


def cdf_bound(lam: float, alpha: float) -> float:
    """Upper bound ``alpha**lam`` on ``Prob(W_min < alpha)`` for a certified bet."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if lam < 0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")
    return alpha**lam


@dataclass(frozen=True)
class RiskSpec:
    """Drawdown specification ``Prob(W_min < alpha) < beta``, or a bare ``lam``.

    Build it with :meth:`from_alpha_beta` to get the guarantee, or
    :meth:`from_lambda` to use ``lam`` as a free risk-aversion knob, in which
    case ``alpha`` and ``beta`` stay ``None``.
    """

    lam: float
    alpha: Optional[float] = None
    beta: Optional[float] = None

    def __post_init__(self):
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise ValueError(f"lambda must be finite and nonnegative, got {self.lam}")
        if (self.alpha is None) != (self.beta is None):
            raise ValueError("alpha and beta must be given together")
        if self.alpha is not None:
            lam = lambda_from_alpha_beta(self.alpha, self.beta)
            if abs(lam - self.lam) > 1e-12 * max(1.0, lam):
                raise ValueError("lam is inconsistent with (alpha, beta)")

    @classmethod
    def from_alpha_beta(cls, alpha: float, beta: float) -> "RiskSpec":
        return cls(lambda_from_alpha_beta(alpha, beta), alpha, beta)

    @classmethod
    def from_lambda(cls, lam: float) -> "RiskSpec":
        return cls(float(lam))

    def bound(self, alpha: float) -> float:
        return cdf_bound(self.lam, alpha)


# ------------------------------------------------------------ distributions


@dataclass(frozen=True, eq=False)
class FiniteOutcomeModel:
    """Returns ``returns[i]`` occur with probability ``probs[i]``.

    ``returns`` is ``K x n`` (row per outcome) and its last column is the cash
    bet, identically one. Probabilities are normalized on construction.
    """

    probs: np.ndarray
    returns: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=np.float64).reshape(-1)
        R = np.array(self.returns, dtype=np.float64)
        if R.ndim != 2:
            raise ValueError("returns must be a K x n matrix")
        K, n = R.shape
        if p.size != K:
            raise ValueError(f"{p.size} probabilities for {K} outcomes")
        if K < 1 or n < 2:
            raise ValueError(f"need K >= 1 and n >= 2, got K={K}, n={n}")
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(R))):
            raise ValueError("non-finite entries in model")
        if np.any(p <= 0):
            raise ValueError("probabilities must be strictly positive")
        p = p / p.sum()
        if abs(p.sum() - 1.0) > PROB_TOL:
            raise ValueError("probabilities do not normalize")
        if np.any(R < 0):
            raise ValueError("returns must be nonnegative")
        if np.max(np.abs(R[:, -1] - 1.0)) > CASH_TOL:
            raise ValueError("last column (cash) must be identically 1")
        R[:, -1] = 1.0
        p.setflags(write=False)
        R.setflags(write=False)
        object.__setattr__(self, "probs", p)
        object.__setattr__(self, "returns", np.ascontiguousarray(R))

    @property
    def K(self) -> int:
        return self.returns.shape[0]

    @property
    def n(self) -> int:
        return self.returns.shape[1]

    def mean_returns(self) -> np.ndarray:
        return self.probs @ self.returns

    def growth(self, b) -> float:
        rb = self.returns @ np.asarray(b, dtype=np.float64)
        with np.errstate(divide="ignore"):
            return float(self.probs @ np.log(rb))

    def to_dict(self) -> dict:
        return {"probs": self.probs.tolist(), "returns": self.returns.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "FiniteOutcomeModel":
        return cls(np.asarray(d["probs"], dtype=float), np.asarray(d["returns"], dtype=float))


class ReturnSampler(ABC):
    """Seeded source of IID return vectors whose last coordinate is exactly 1.

    ``draw(count, stream)`` is a pure function of ``(seed, stream, count)``, so
    distinct consumers (training batches, hold-out estimates, simulation
    trajectories) use distinct stream ids and never share state.
    """

    def __init__(self, n: int, seed: int):
        if n < 2:
            raise ValueError("need n >= 2")
        self.n = int(n)
        self.seed = int(seed)

    @abstractmethod
    def _draw(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """Return ``count`` vectors as a ``(count, n)`` array."""

    def draw(self, count: int, stream: int) -> np.ndarray:
        out = self._draw(rng_for(self.seed, stream), int(count))
        if out.shape != (count, self.n):
            raise ValueError(f"sampler produced shape {out.shape}, expected {(count, self.n)}")
        return out

    def reseeded(self, seed: int) -> "ReturnSampler":
        """Same distribution, different sampling seed."""
        clone = object.__new__(type(self))
        clone.__dict__.update(self.__dict__)
        clone.seed = int(seed)
        return clone

    def describe(self) -> dict:
        return {"kind": type(self).__name__, "n": self.n, "seed": self.seed}


class FiniteSampler(ReturnSampler):
    """A :class:`FiniteOutcomeModel` viewed as a sampler."""

    def __init__(self, model: FiniteOutcomeModel, seed: int):
        super().__init__(model.n, seed)
        self.model = model
        self._cdf = np.cumsum(model.probs)
        self._cdf[-1] = 1.0

    def draw_indices(self, count: int, stream: int) -> np.ndarray:
        u = rng_for(self.seed, stream).random(int(count))
        return np.searchsorted(self._cdf, u, side="right").clip(0, self.model.K - 1)

    def _draw(self, rng, count):
        u = rng.random(count)
        idx = np.searchsorted(self._cdf, u, side="right").clip(0, self.model.K - 1)
        return self.model.returns[idx]

    def describe(self) -> dict:
        return {"kind": "finite", "n": self.n, "K": self.model.K, "seed": self.seed}


Source = Union[FiniteOutcomeModel, ReturnSampler]


def as_sampler(source: Source, seed: int = 0) -> ReturnSampler:
    if isinstance(source, ReturnSampler):
        return source
    return FiniteSampler(source, seed)


# ------------------------------------------------------- config and report


@dataclass(frozen=True)
class SolverConfig:
    """Knobs shared by every solver.

    ``eps`` is the cash floor of the truncated simplex, ``dual_cap`` the bound
    ``M`` on the risk multiplier, ``step_constant`` the ``C`` in ``C/sqrt(k)``.
    ``kkt_tol`` applies to exact (finite) solves and ``sampled_kkt_tol`` to
    Monte Carlo certified ones.
    """

    eps: float = 1e-6
    dual_cap: float = 100.0
    step_constant: float = 1.0
    max_iters: int = 10_000
    batch_size: int = 100
    kkt_tol: float = 1e-6
    sampled_kkt_tol: float = 1e-3
    bisect_tol: float = 1e-12
    support_tol: float = 1e-6
    holdout_samples: int = 100_000
    moment_samples: int = 1_000_000
    warm_start: bool = True
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.eps < 1.0:
            raise ValueError("eps must lie in (0, 1)")
        if self.dual_cap <= 0 or self.step_constant <= 0:
            raise ValueError("dual_cap and step_constant must be positive")
        for name in ("kkt_tol", "sampled_kkt_tol", "bisect_tol", "support_tol"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.max_iters < 1 or self.batch_size < 1 or self.holdout_samples < 2:
            raise ValueError("iteration and sample counts must be positive")

    def with_(self, **kw) -> "SolverConfig":
        return replace(self, **kw)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass
class SolveReport:
    bet: BetVector
    kappa: float = 0.0
    growth: float = 0.0
    risk_value: float = 1.0
    kkt_residual: float = 0.0
    iterations: int = 0
    converged: bool = True
    lam: float = 0.0
    method: str = ""
    residuals: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)
    stderr: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "lambda": self.lam,
            "bet": self.bet.tolist(),
            "kappa": self.kappa,
            "growth": self.growth,
            "risk_value": self.risk_value,
            "kkt_residual": self.kkt_residual,
            "residuals": dict(self.residuals),
            "iterations": self.iterations,
            "converged": self.converged,
            "flags": dict(self.flags),
            "stderr": dict(self.stderr),
        }


# ------------------------------------------------------------------- files


def load_problem(path) -> FiniteOutcomeModel:
    """Read a ``{"probs": [...], "returns": [[...], ...]}`` problem file."""
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict) or "probs" not in data or "returns" not in data:
        raise ValueError(f"{path}: expected an object with 'probs' and 'returns'")
    return FiniteOutcomeModel.from_dict(data)


def save_problem(model: FiniteOutcomeModel, path) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), indent=1) + "\n")
