"""Reproducible problem instances.

``gen_finite`` follows the finite-outcome experiment recipe: uniform
probabilities, risky returns uniform on [0.7, 1.3], and a fixed number of
cells overwritten with the extreme values 0.2 and 2.

``gen_lognormal_mixture`` builds an equal-weight mixture of two lognormal
return distributions. Its parameters are an artifact convention
(:data:`MIXTURE_RECIPE`): log-means uniform on
``[-0.05, 0.05]`` and covariances ``0.05 * A A^T / ||A A^T||_2`` with ``A``
standard Gaussian, so every covariance has spectral norm exactly 0.05. The
cash coordinate has zero log-mean and zero variance, so it is exactly 1.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

import numpy as np

from rckelly.model import FiniteOutcomeModel, ReturnSampler

__all__ = [
    "LognormalMixtureSampler",
    "MIXTURE_RECIPE",
    "extreme_count",
    "extreme_probability",
    "gen_finite",
    "gen_lognormal_mixture",
    "gen_two_outcome",
    "load_sampler_spec",
    "sampler_spec",
]

MIXTURE_RECIPE = "lognormal-mixture-v1"
LOW, HIGH = 0.2, 2.0

# instance RNGs mix a tag into the entropy so they never collide with the
# (seed, stream) substreams used for sampling and simulation
_TAG_FINITE = 0xF1417E
_TAG_MIXTURE = 0x313C


def _instance_rng(seed: int, tag: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), tag])))


def extreme_count(n: int, K: int) -> int:
    """Cells set to each extreme value: 30 per 1900 risky cells."""
    return int(round(30 * K * (n - 1) / 1900))


def extreme_probability(n: int, K: int, count: Optional[int] = None) -> float:
    """Chance that a return vector holds at least one extreme entry.

    Uses the same approximation as the recipe: each of the ``n - 1`` risky
    entries is extreme independently with probability ``2 count / (K (n-1))``.
    """
    c = extreme_count(n, K) if count is None else count
    return 1.0 - (1.0 - 2 * c / (K * (n - 1))) ** (n - 1)


def gen_finite(n: int = 20, K: int = 100, seed: int = 0, *, extremes: Optional[int] = None) -> FiniteOutcomeModel:
    """Random finite-outcome instance with ``n`` bets (last is cash)."""
    if n < 2 or K < 1:
        raise ValueError("need n >= 2 and K >= 1")
    cells = K * (n - 1)
    c = extreme_count(n, K) if extremes is None else int(extremes)
    if c < 1 or 2 * c > cells:
        raise ValueError(f"cannot place {c} low and {c} high extreme returns in {cells} risky cells")
    rng = _instance_rng(seed, _TAG_FINITE)
    probs = 1.0 - rng.random(K)
    risky = rng.uniform(0.7, 1.3, size=(K, n - 1))
    picks = rng.choice(cells, size=2 * c, replace=False)
    flat = risky.reshape(-1)
    flat[picks[:c]] = LOW
    flat[picks[c:]] = HIGH
    returns = np.hstack([risky, np.ones((K, 1))])
    return FiniteOutcomeModel(probs, returns)


def gen_two_outcome(pi: float, P: float) -> FiniteOutcomeModel:
    """Bet paying ``P`` with probability ``pi`` and nothing otherwise, plus cash."""
    if not 0.0 < pi < 1.0:
        raise ValueError(f"pi must lie in (0, 1), got {pi}")
    if not P > 0.0:
        raise ValueError(f"P must be positive, got {P}")
    return FiniteOutcomeModel(np.array([pi, 1.0 - pi]), np.array([[P, 1.0], [0.0, 1.0]]))


class LognormalMixtureSampler(ReturnSampler):
    """``r = exp(z)`` with ``z ~ N(means[c], covs[c])``, ``c`` uniform on components."""

    def __init__(self, means, covs, seed: int = 0, *, instance_seed: Optional[int] = None):
        means = np.asarray(means, dtype=float)
        covs = np.asarray(covs, dtype=float)
        m, n = means.shape
        if covs.shape != (m, n, n):
            raise ValueError("covs must have shape (components, n, n)")
        if np.any(means[:, -1] != 0.0) or np.any(covs[:, -1, :] != 0.0) or np.any(covs[:, :, -1] != 0.0):
            raise ValueError("cash coordinate must have zero log-mean and zero variance")
        super().__init__(n, seed)
        self.means = means
        self.covs = covs
        self.instance_seed = instance_seed
        # symmetric square roots tolerate singular covariances
        roots = []
        for S in covs[:, :-1, :-1]:
            w, V = np.linalg.eigh(0.5 * (S + S.T))
            roots.append((V * np.sqrt(np.clip(w, 0.0, None))) @ V.T)
        self._roots = np.array(roots)

    def _draw(self, rng, count):
        comp = rng.integers(0, self.means.shape[0], size=count)
        xi = rng.standard_normal((count, self.n - 1))
        z = self.means[comp, :-1] + np.einsum("kij,kj->ki", self._roots[comp], xi)
        out = np.ones((count, self.n))
        out[:, :-1] = np.exp(z)
        return out

    def mean_log_returns(self) -> np.ndarray:
        return self.means.mean(axis=0)

    def describe(self) -> dict:
        return {"kind": "mixture", "n": self.n, "seed": self.seed, "instance_seed": self.instance_seed,
                "recipe": MIXTURE_RECIPE}


def gen_lognormal_mixture(n: int = 20, seed: int = 0, *, sample_seed: Optional[int] = None) -> LognormalMixtureSampler:
    """Two-component lognormal mixture built from :data:`MIXTURE_RECIPE`.

    ``seed`` fixes the distribution; ``sample_seed`` (default ``seed``) seeds
    the draws.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    rng = _instance_rng(seed, _TAG_MIXTURE)
    means = np.zeros((2, n))
    covs = np.zeros((2, n, n))
    for c in range(2):
        means[c, :-1] = rng.uniform(-0.05, 0.05, size=n - 1)
        A = rng.standard_normal((n - 1, n - 1))
        S = A @ A.T
        covs[c, :-1, :-1] = 0.05 * S / np.linalg.norm(S, 2)
    return LognormalMixtureSampler(means, covs, seed if sample_seed is None else sample_seed, instance_seed=seed)


def sampler_spec(sampler: LognormalMixtureSampler) -> dict:
    return {"kind": "mixture", "recipe": MIXTURE_RECIPE, "n": sampler.n, "seed": sampler.instance_seed}


def load_sampler_spec(spec, sample_seed: Optional[int] = None) -> LognormalMixtureSampler:
    """Rebuild a sampler from :func:`sampler_spec` output (dict or file path)."""
    if not isinstance(spec, dict):
        spec = json.loads(Path(spec).read_text())
    if spec.get("kind") != "mixture" or spec.get("recipe") != MIXTURE_RECIPE:
        raise ValueError(f"unsupported sampler spec {spec!r}")
    return gen_lognormal_mixture(int(spec["n"]), int(spec["seed"]), sample_seed=sample_seed)
