import csv
import io
import json
import math
import warnings

import numpy as np
import pytest

from rckelly import instances, montecarlo, qrck
from rckelly.model import BetVector, FiniteOutcomeModel, FiniteSampler, SolverConfig, cdf_bound
from rckelly.montecarlo import SimulationPlan


def test_plan_validation():
    for kw in ({"trajectories": 0}, {"horizon": 0}, {"alpha_grid": (0.5, 1.0)}, {"threads": 0}):
        with pytest.raises(ValueError):
            SimulationPlan(**kw)
    assert "threads" not in SimulationPlan(threads=4).to_dict()


def test_cash_never_draws_down(reference_model):
    st = montecarlo.simulate(reference_model, BetVector.cash(20), SimulationPlan(trajectories=500))
    assert np.all(st.wmin_samples == 1.0)
    assert all(p == 0.0 for p, _ in st.drawdown_risk.values())
    for c in montecarlo.validate_bound(st, 3.0):
        assert c.ok and c.margin == pytest.approx(c.bound) and c.bound == cdf_bound(3.0, c.alpha)


def test_certain_win_by_hand():
    m = FiniteOutcomeModel([1.0], [[2.0, 1.0]])
    st = montecarlo.simulate(m, [0.5, 0.5], SimulationPlan(trajectories=10, horizon=7))
    np.testing.assert_allclose(st.final_log_wealth, 6 * math.log(1.5))
    assert np.all(st.wmin_samples == 1.0)
    assert st.growth_estimate[0] == pytest.approx(math.log(1.5))


def test_ruin_recorded():
    m = instances.gen_two_outcome(0.5, 2.0)
    st = montecarlo.simulate(m, [1.0, 0.0], SimulationPlan(trajectories=200, horizon=20))
    ruined = st.wmin_samples == 0.0
    assert ruined.mean() > 0.99
    assert np.all(st.final_log_wealth[ruined] == -np.inf)


def test_strict_threshold():
    # one period: wealth goes to 0.5 or 1.5, so the minimum is exactly 0.5 or 1
    m = FiniteOutcomeModel([0.5, 0.5], [[0.0, 1.0], [2.0, 1.0]])
    st = montecarlo.simulate(m, [0.5, 0.5], SimulationPlan(trajectories=2000, horizon=2))
    assert set(np.round(st.wmin_samples, 12)) <= {0.5, 1.0}
    assert st.risk(0.5) == 0.0  # ties at alpha do not count
    assert st.risk(0.5 + 1e-9) == pytest.approx(0.5, abs=0.05)


def test_thread_independence(reference_model, reference_bets):
    b = reference_bets["kelly"].bet
    plan = SimulationPlan(trajectories=1700, horizon=50, seed=3)
    one = montecarlo.simulate(reference_model, b, plan)
    four = montecarlo.simulate(reference_model, b, SimulationPlan(1700, 50, plan.alpha_grid, 3, 0, threads=4))
    np.testing.assert_array_equal(one.wmin_samples, four.wmin_samples)
    np.testing.assert_array_equal(one.final_log_wealth, four.final_log_wealth)
    assert one.to_csv() == four.to_csv() and one.summary_json() == four.summary_json()


def test_substreams_are_per_trajectory(reference_model, reference_bets):
    b = reference_bets[4.0].bet
    full = montecarlo.simulate(reference_model, b, SimulationPlan(trajectories=600, horizon=30, seed=1))
    tail = montecarlo.simulate(reference_model, b, SimulationPlan(200, 30, (0.7,), 1, stream_offset=400))
    np.testing.assert_array_equal(full.wmin_samples[400:], tail.wmin_samples)


def test_common_random_numbers(reference_model, reference_bets):
    bets = [reference_bets["kelly"].bet, reference_bets[6.456].bet]
    plan = SimulationPlan(trajectories=300, horizon=40)
    both = montecarlo.simulate_many(reference_model, bets, plan)
    for b, st in zip(bets, both):
        np.testing.assert_array_equal(st.wmin_samples, montecarlo.simulate(reference_model, b, plan).wmin_samples)


def test_sampler_source():
    s = instances.gen_lognormal_mixture(5, seed=2)
    b = BetVector([0.2, 0.2, 0.2, 0.2, 0.2])
    a = montecarlo.simulate(s, b, SimulationPlan(trajectories=300, horizon=20, seed=4))
    c = montecarlo.simulate(s, b, SimulationPlan(trajectories=300, horizon=20, seed=4, threads=3))
    np.testing.assert_array_equal(a.wmin_samples, c.wmin_samples)
    assert np.all((a.wmin_samples > 0) & (a.wmin_samples <= 1))


def test_dimension_mismatch(reference_model):
    with pytest.raises(ValueError):
        montecarlo.simulate(reference_model, BetVector.cash(3), SimulationPlan(trajectories=5))


def test_outputs(reference_model, reference_bets):
    st = montecarlo.simulate(reference_model, reference_bets[5.5].bet, SimulationPlan(trajectories=50, horizon=10))
    rows = list(csv.reader(io.StringIO(st.to_csv())))
    assert rows[0] == ["index", "wmin", "final_log_wealth"] and len(rows) == 51
    assert float(rows[1][1]) == st.wmin_samples[0]
    summary = json.loads(st.summary_json())
    assert summary["trajectories"] == 50 and summary["metadata"]["plan"]["seed"] == 0
    assert "rng" in summary["metadata"]


def test_reference_statistics(reference_model, reference_bets, reference_stats):
    kelly_st = reference_stats["kelly"]
    # Kelly drawdown risk at 0.7 near the target 0.397
    assert kelly_st.risk(0.7) == pytest.approx(0.397, abs=0.05)
    for key, st in reference_stats.items():
        risks = [st.risk(a) for a in sorted(st.alpha_grid)]
        assert all(x <= y for x, y in zip(risks, risks[1:]))
        assert np.all((st.wmin_samples > 0) & (st.wmin_samples <= 1))
        g, se = st.growth_estimate
        assert abs(g - reference_bets[key].growth) <= 4 * se
        if key != "kelly":
            assert all(c.ok for c in montecarlo.validate_bound(st, key))
            # empirical CDF never crosses above the bound plus noise
            grid = np.linspace(0.05, 0.99, 95)
            cdf = st.cdf_at(grid)
            band = np.minimum(1.0, grid**key + 3 * np.sqrt(cdf * (1 - cdf) / st.count))
            assert np.all(cdf <= band + 1e-12)


def test_horizon_monotone(reference_model, reference_bets):
    b = reference_bets["kelly"].bet
    short = montecarlo.simulate(reference_model, b, SimulationPlan(trajectories=2000, horizon=100))
    long = montecarlo.simulate(reference_model, b, SimulationPlan(trajectories=2000, horizon=200))
    # the first 99 periods of each trajectory coincide, so the minimum can only drop
    assert np.all(long.wmin_samples <= short.wmin_samples)
    for a in short.alpha_grid:
        assert short.risk(a) <= long.risk(a)


def test_qrck_risk_expected_pass(reference_model):
    # the quadratic bet has no guarantee; a violation is logged, not failed
    mo = qrck.estimate_moments(reference_model)
    bet = qrck.solve_qrck(mo, 6.456).bet
    st = montecarlo.simulate(reference_model, bet, SimulationPlan(trajectories=5000))
    bad = [c for c in montecarlo.validate_bound(st, 6.456) if not c.ok]
    if bad:
        warnings.warn(f"QRCK bet exceeds the RCK bound at {[c.alpha for c in bad]}")


class TestFrontier:
    def test_endpoints_and_lambda_zero(self, reference_model, reference_bets):
        plan = SimulationPlan(trajectories=1000)
        rows = montecarlo.frontier(reference_model, [0.0], [0.0, 1.0], plan)
        by = {(r.method, r.param): r for r in rows}
        assert by[("fractional", 0.0)].risk == 0.0 and by[("fractional", 0.0)].growth == 0.0
        k = by[("fractional", 1.0)]
        assert k.growth == pytest.approx(by[("rck", 0.0)].growth, abs=1e-6)
        assert k.risk == pytest.approx(by[("rck", 0.0)].risk, abs=3 * k.stderr + 1e-12)
        assert [r.risk for r in rows] == sorted(r.risk for r in rows)
        text = montecarlo.frontier_csv(rows)
        assert text.splitlines()[0] == "method,param,growth,risk,bound,stderr,converged"

    def test_rck_beats_fractional_kelly(self, reference_model):
        plan = SimulationPlan(trajectories=4000)
        lams = [5.0, 5.5, 6.0, 6.456, 7.0]
        fracs = list(np.round(np.linspace(0.2, 0.8, 13), 3))
        rows = montecarlo.frontier(reference_model, lams, fracs, plan)
        rck_rows = [r for r in rows if r.method == "rck"]
        frac_rows = [r for r in rows if r.method == "fractional"]

        def growth_at(rs, risk):
            rs = sorted(rs, key=lambda r: r.risk)
            return np.interp(risk, [r.risk for r in rs], [r.growth for r in rs])

        assert growth_at(rck_rows, 0.1) > growth_at(frac_rows, 0.1)

    def test_empty(self, reference_model):
        with pytest.raises(ValueError):
            montecarlo.frontier(reference_model, [], [], SimulationPlan(trajectories=10))
