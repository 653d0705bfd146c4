import numpy as np
import pytest

from conftest import random_model, simplex3_grid_max
from rckelly import instances, kelly
from rckelly.model import BetVector, FiniteOutcomeModel, FiniteSampler, ReturnSampler, SolverConfig, fractional_kelly


def grid_two_outcome(pi, P, step=1e-5):
    b1 = np.arange(0.0, 1.0, step)
    g = pi * np.log(1 + b1 * (P - 1)) + (1 - pi) * np.log(1 - b1)
    return b1[np.argmax(g)]


class UnitSampler(ReturnSampler):
    """Every draw is the all-ones vector."""

    def _draw(self, rng, count):
        rng.random(count)
        return np.ones((count, self.n))


class TestTwoOutcome:
    @pytest.mark.parametrize("pi,P,b1", [(0.6, 2.0, 0.2), (0.4, 2.0, 0.0), (0.55, 3.0, 0.325)])
    def test_examples(self, pi, P, b1):
        b = kelly.solve_two_outcome(pi, P)
        assert b[0] == pytest.approx(b1, abs=1e-12)
        assert abs(grid_two_outcome(pi, P) - b1) <= 1e-4

    def test_domain(self):
        for pi, P in [(0.5, 1.0), (0.5, 0.5), (0.0, 2.0), (1.0, 2.0)]:
            with pytest.raises(ValueError):
                kelly.solve_two_outcome(pi, P)

    def test_finite_solver_agrees(self):
        for pi, P in [(0.6, 2.0), (0.3, 5.0), (0.9, 1.2)]:
            rep = kelly.solve_finite(instances.gen_two_outcome(pi, P))
            assert rep.bet[0] == pytest.approx(kelly.solve_two_outcome(pi, P)[0], abs=1e-4)


class TestNoBet:
    def test_all_losers(self):
        R = np.array([[0.8, 1.0, 1.0], [1.0, 0.8, 1.0]])
        m = FiniteOutcomeModel([0.5, 0.5], R)  # E r_i = 0.9
        assert kelly.detect_no_bet(m)
        rep = kelly.solve_finite(m)
        assert rep.bet == BetVector.cash(3) and rep.growth == 0.0 and rep.converged

    def test_one_winner(self):
        R = np.array([[0.8, 1.02, 1.0], [1.0, 1.0, 1.0]])
        m = FiniteOutcomeModel([0.5, 0.5], R)  # E r_2 = 1.01
        assert not kelly.detect_no_bet(m)
        assert not kelly.detect_no_bet(instances.gen_two_outcome(0.6, 2.0))
        assert kelly.solve_finite(m).bet[1] > 0

    def test_no_bet_iff_cash_optimal(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            m = random_model(rng, 3, 6, 0.6, 1.25)
            rep = kelly.solve_finite(m)
            assert kelly.detect_no_bet(m) == (rep.bet.cash_fraction > 1 - 1e-6)


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(2)
    m = random_model(rng, 6, 40)
    for _ in range(10):
        b = rng.dirichlet(np.ones(6))
        g = kelly.finite_gradient(m, b)
        h = 1e-6
        fd = np.array([(m.growth(b + h * e) - m.growth(b - h * e)) / (2 * h) for e in np.eye(6)])
        np.testing.assert_allclose(g, fd, rtol=1e-6)


class TestSolveFinite:
    def test_grid_oracle_n3(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            m = random_model(rng, 3, 5, 0.6, 1.5)
            rep = kelly.solve_finite(m)
            _, best = simplex3_grid_max(lambda B: np.log(B @ m.returns.T) @ m.probs)
            assert rep.growth >= best - 1e-5
            assert rep.converged and rep.kkt_residual <= 1e-6

    def test_report(self, reference_model):
        rep = kelly.solve_finite(reference_model)
        assert rep.converged and rep.kkt_residual <= SolverConfig().kkt_tol
        assert rep.growth == pytest.approx(reference_model.growth(rep.bet), abs=1e-15)
        assert rep.growth > 0
        for f in np.linspace(0, 1, 21):
            assert rep.growth >= reference_model.growth(fractional_kelly(rep.bet, f)) - 1e-12

    def test_duplicate_columns_compare_objective(self):
        rng = np.random.default_rng(4)
        R = rng.uniform(0.7, 1.5, size=(20, 3))
        R = np.column_stack([R[:, 0], R[:, 0], R[:, 1], np.ones(20)])
        m = FiniteOutcomeModel(np.ones(20), R)
        m2 = FiniteOutcomeModel(np.ones(20), np.delete(R, 1, axis=1))
        assert kelly.solve_finite(m).growth == pytest.approx(kelly.solve_finite(m2).growth, abs=1e-9)


class TestSolveSampled:
    def test_all_cash_world(self):
        rep = kelly.solve_sampled(UnitSampler(4, 0), 4, SolverConfig(max_iters=500))
        assert rep.growth == pytest.approx(0.0, abs=1e-12)
        assert rep.bet.weights.min() >= 0 and rep.bet.cash_fraction > 1e-6

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            kelly.solve_sampled(UnitSampler(4, 0), 5)
        with pytest.raises(TypeError):
            kelly.solve_sampled(np.ones((3, 3)), 3)

    def test_wrapped_finite_model(self):
        m = instances.gen_finite(5, 40, 1)
        det = kelly.solve_finite(m)
        rep = kelly.solve_sampled(FiniteSampler(m, 0), m.n)
        assert np.abs(rep.bet.weights - det.bet.weights).max() <= 1e-2
        assert rep.iterations == 10_000
        assert rep.flags["eps_valid"]

    def test_wrapped_reference_objective(self, reference_model):
        # the reference optimum is flat, so compare objective values
        det = kelly.solve_finite(reference_model)
        rep = kelly.solve_sampled(FiniteSampler(reference_model, 1), reference_model.n)
        assert reference_model.growth(rep.bet) >= det.growth - 1e-3

    def test_deterministic(self):
        m = instances.gen_finite(5, 40, 1)
        cfg = SolverConfig(max_iters=300)
        a = kelly.solve_sampled(FiniteSampler(m, 3), m.n, cfg)
        b = kelly.solve_sampled(FiniteSampler(m, 3), m.n, cfg)
        assert a.to_dict() == b.to_dict()
        c = kelly.solve_sampled(FiniteSampler(m, 4), m.n, cfg)
        assert a.bet != c.bet

    def test_holdout_noise_is_reported(self):
        m = instances.gen_finite(5, 40, 1)
        rep = kelly.solve_sampled(FiniteSampler(m, 0), m.n)
        assert rep.stderr["growth"] > 0
        assert len(rep.stderr["residuals"]) == 3

    def test_mixture_growth_reference(self):
        s = instances.gen_lognormal_mixture(20, seed=0)
        rep = kelly.solve_sampled(s, 20)
        # any bet's growth is at most log max_i E r_i, the recipe's ceiling
        ceiling = np.log(np.max(np.exp(s.means[:, :-1] + 0.5 * np.diagonal(s.covs, axis1=1, axis2=2)[:, :-1]).mean(axis=0)))
        assert rep.growth <= ceiling + 4 * rep.stderr["growth"]
        assert rep.growth > 0.03

    @pytest.mark.xfail(strict=True, reason="target growth 0.077 lies above the generator recipe's growth ceiling")
    def test_mixture_growth_target(self):
        rep = kelly.solve_sampled(instances.gen_lognormal_mixture(20, seed=0), 20)
        assert rep.growth == pytest.approx(0.077, abs=0.01)
