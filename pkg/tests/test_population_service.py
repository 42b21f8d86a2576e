import math

import numpy as np
import pytest

from app.core.errors import TruncationError, UnsupportedLawError
from app.models.trajectory import OVER_BUDGET, Exact, LogApprox, StepConfig


def test_step_exact_square_law_is_deterministic(population, square_law):
    rng = np.random.default_rng(0)
    assert population.step_exact(5, square_law, rng, budget=100) == Exact(10)


def test_step_exact_over_budget(population, sibuya_half):
    rng = np.random.default_rng(0)
    assert population.step_exact(11, sibuya_half, rng, budget=10) is OVER_BUDGET


def test_step_exact_at_least_count(population, sibuya_half):
    rng = np.random.default_rng(1)
    for count in (1, 10, 1000):
        assert population.step_exact(count, sibuya_half, rng, budget=10**6).count >= count


def test_step_asymptotic(population, sibuya_half, square_law):
    rng = np.random.default_rng(2)
    state = population.step_asymptotic(math.log(1e9), sibuya_half, rng)
    assert isinstance(state, LogApprox)
    assert math.isfinite(state.log_count)
    with pytest.raises(UnsupportedLawError):
        population.step_asymptotic(10.0, square_law, rng)


def test_square_trajectory_doubles(population, square_env):
    traj = population.simulate_trajectory(square_env, 10)
    assert [s.count for s in traj.states] == [2**n for n in range(11)]
    assert traj.mode_switch_index is None


def test_square_trajectory_truncates_past_budget(population, square_env):
    traj = population.simulate_trajectory(square_env, 25, config=StepConfig(exact_budget=1000))
    # Z_10 = 1024 is the first count above the budget; the square law has no stable step
    assert traj.truncated_at == 10
    assert traj.n == 10
    with pytest.raises(TruncationError):
        population.simulate_trajectory(
            square_env, 25, config=StepConfig(exact_budget=1000, raise_on_truncation=True)
        )


def test_mode_switch_is_one_way(population, example_env):
    traj = population.simulate_trajectory(example_env, 20, config=StepConfig(exact_budget=20))
    assert traj.mode_switch_index is not None
    assert not traj.truncated
    k = traj.mode_switch_index
    assert all(traj.is_exact(n) for n in range(k))
    assert all(not traj.is_exact(n) for n in range(k, traj.n + 1))


def test_sibuya_without_asymptotic_truncates(population, example_env):
    config = StepConfig(exact_budget=50, asymptotic_enabled=False)
    traj = population.simulate_trajectory(example_env, 30, config=config)
    assert traj.truncated
    assert traj.mode_switch_index is None


def test_trajectory_reproducible(population, example_env):
    rng_a = population.population_rng(example_env, 3)
    rng_b = population.population_rng(example_env, 3)
    a = population.simulate_trajectory(example_env, 15, rng_a)
    b = population.simulate_trajectory(example_env, 15, rng_b)
    assert a.states == b.states


def test_square_y_is_constant(population, square_env):
    traj = population.simulate_trajectory(square_env, 12)
    for n in range(13):
        assert population.compute_Y(square_env, traj, n) == pytest.approx(math.exp(-1.0), rel=1e-10)


def test_square_martingale_is_constant(population, square_env):
    traj = population.simulate_trajectory(square_env, 8)
    s = 0.3
    for sample in population.compute_martingale_path(square_env, traj, s):
        assert sample.X_n == pytest.approx(math.exp(-s), rel=1e-10)
        assert sample.log_W_n == pytest.approx(math.log(s), abs=1e-9)


def test_compute_Y_inside_unit_interval(population, example_env):
    traj = population.simulate_trajectory(example_env, 10)
    for n in range(traj.n + 1):
        y = population.compute_Y(example_env, traj, n)
        assert 0.0 < y < 1.0


def test_simulate_until_stable_records_y_path(population, example_env):
    traj = population.simulate_until_stable(example_env, tolerance=1e-3, n_max=30, n_min=2)
    assert len(traj.y_path) == traj.n + 1
    assert len(traj.log_one_minus_y_path) == traj.n + 1
    if traj.stabilized_at is not None:
        assert abs(traj.y_path[-1] - traj.y_path[-2]) < 1e-3
        assert traj.stabilized_at >= 2


def test_martingale_rejects_bad_arguments(population, square_env):
    traj = population.simulate_trajectory(square_env, 3)
    with pytest.raises(ValueError):
        population.compute_martingale_logX(square_env, traj, 0.0, 1)
    with pytest.raises(ValueError):
        population.compute_martingale_logX(square_env, traj, 1.0, 4)


def test_sample_offspring(population, square_law, sibuya_half):
    rng = np.random.default_rng(7)
    assert population.sample_offspring(square_law, rng) == 2
    draws = [population.sample_offspring(sibuya_half, rng) for _ in range(200)]
    assert all(isinstance(d, int) and d >= 1 for d in draws)
    # P(X = 1) = alpha
    assert abs(draws.count(1) / 200 - 0.5) < 4 * math.sqrt(0.25 / 200)
