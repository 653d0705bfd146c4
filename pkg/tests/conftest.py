import itertools

import numpy as np
import pytest
from hypothesis import settings

from rckelly import instances
from rckelly.model import FiniteOutcomeModel

# the first call of a compiled kernel includes JIT or cache loading time
settings.register_profile("rckelly", deadline=None, derandomize=True)
settings.load_profile("rckelly")

#: finite-outcome instance with a realistic risk profile (Kelly drawdown
#: risk near 0.4 at alpha = 0.7, RCK at lambda = 6.456 near 0.07)
REFERENCE_SEED = 103


@pytest.fixture(scope="session")
def reference_model():
    return instances.gen_finite(20, 100, REFERENCE_SEED)


def random_model(rng, n, K, lo=0.5, hi=1.6):
    R = rng.uniform(lo, hi, size=(K, n))
    R[:, -1] = 1.0
    return FiniteOutcomeModel(rng.random(K) + 0.05, R)


def projection_oracle(z, eps):
    """Projection onto the truncated simplex by active-set enumeration."""
    z = np.asarray(z, dtype=float)
    n = z.size
    best = None
    for zeros in itertools.product((False, True), repeat=n - 1):
        for cash_at_floor in (False, True):
            fixed = np.array(list(zeros) + [cash_at_floor])
            free = ~fixed
            if not free.any():
                continue
            floor = eps if cash_at_floor else 0.0
            nu = (z[free].sum() - (1.0 - floor)) / free.sum()
            b = np.zeros(n)
            b[free] = z[free] - nu
            if cash_at_floor:
                b[-1] = eps
            if np.any(b[:-1] < -1e-12) or b[-1] < eps - 1e-12:
                continue
            # multipliers of the active bounds must be nonnegative
            if np.any(z[:-1][np.array(zeros)] - nu > 1e-12):
                continue
            if cash_at_floor and z[-1] - nu > eps + 1e-12:
                continue
            d = np.sum((b - z) ** 2)
            if best is None or d < best[0]:
                best = (d, b)
    return best[1]


def simplex3_grid_max(f, step=1e-3, refine=True):
    """Maximize ``f`` over the 3-simplex on a grid, then refine locally."""
    g = np.arange(0.0, 1.0 + step / 2, step)
    b1, b2 = np.meshgrid(g, g, indexing="ij")
    mask = b1 + b2 <= 1.0 + 1e-12
    B = np.stack([b1[mask], b2[mask], np.clip(1.0 - b1[mask] - b2[mask], 0.0, None)], axis=1)
    vals = f(B)
    i = int(np.nanargmax(vals))
    best_b, best_v = B[i], vals[i]
    if refine:
        h = step
        for _ in range(30):
            h /= 2
            d = np.arange(-4, 5) * h
            d1, d2 = np.meshgrid(d, d, indexing="ij")
            C = np.stack([best_b[0] + d1.ravel(), best_b[1] + d2.ravel()], axis=1)
            C = np.column_stack([C, 1.0 - C.sum(axis=1)])
            C = C[np.all(C >= 0.0, axis=1)]
            v = f(C)
            j = int(np.nanargmax(v))
            if v[j] > best_v:
                best_b, best_v = C[j], v[j]
    return best_b, best_v


@pytest.fixture(scope="session")
def reference_bets(reference_model):
    from rckelly import kelly, rck

    bets = {"kelly": kelly.solve_finite(reference_model)}
    for lam in (4.0, 5.5, 6.456):
        bets[lam] = rck.solve_finite_rck(reference_model, lam)
    return bets


@pytest.fixture(scope="session")
def reference_stats(reference_model, reference_bets):
    from rckelly import montecarlo

    keys = list(reference_bets)
    stats = montecarlo.simulate_many(reference_model, [reference_bets[k].bet for k in keys], montecarlo.SimulationPlan())
    return dict(zip(keys, stats))
