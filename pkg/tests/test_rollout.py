from concurrent.futures import ProcessPoolExecutor

import numpy as np
import pytest

from eyal import maze_env
from eyal.maze_env import canonical_maze
from eyal.policy_net import forward, init_params, param_count
from eyal.rollout import (
    StepBudget,
    evaluate_population,
    maze_architecture,
    rollout,
    run_episodes,
    stream_rng,
    validate,
)

ARCH = maze_architecture((16, 16))


@pytest.fixture(scope="module")
def params():
    return init_params(ARCH, np.random.default_rng(0))


def reference_episode(arch, params, config, seed):
    """Episode assembled from the public reset/step/forward operators."""
    from eyal.rollout import episode_rng

    state, obs = maze_env.reset(config, episode_rng(seed))
    total, n = 0.0, 0
    while not state.done:
        action = forward(arch, params, obs)
        state, r, obs, _ = maze_env.step(config, state, action)
        total += r
        n += 1
    return state.position, total, n


def test_zero_policy_sparse_times_out():
    zero = np.zeros(param_count(ARCH), dtype=np.float32)
    res = rollout(ARCH, zero, canonical_maze("sparse"), (0, 1, 2))
    assert res.fitness == -500.0 and res.env_steps == 500 and not res.reached_goal


@pytest.mark.parametrize("mode", ["sparse", "deceptive"])
def test_rollout_matches_operator_composition(params, mode):
    config = canonical_maze(mode)
    for seed in range(5):
        res = rollout(ARCH, params, config, (seed,))
        pos, total, n = reference_episode(ARCH, params, config, (seed,))
        assert res.env_steps == n
        assert res.trajectory.final_position == pytest.approx(pos, abs=1e-5)
        assert res.fitness == pytest.approx(total, rel=1e-5)


def test_rollout_is_deterministic(params):
    config = canonical_maze("deceptive")
    a = rollout(ARCH, params, config, (7, 7))
    b = rollout(ARCH, params, config, (7, 7))
    assert a.fitness == b.fitness and a.trajectory.final_position == b.trajectory.final_position
    assert a.trajectory.observations.tobytes() == b.trajectory.observations.tobytes()


def test_trajectory_invariants(params):
    for mode in ("sparse", "deceptive"):
        for res in run_episodes(ARCH, params, canonical_maze(mode), [(i,) for i in range(20)]):
            t = res.trajectory
            assert t.length == len(t.rewards) == len(t.actions) == res.env_steps <= 500
            assert len(t.observations) == t.length + 1
            assert t.total_reward == pytest.approx(float(np.sum(t.rewards)), rel=1e-9)
            assert res.fitness == t.total_reward
            if mode == "sparse":
                assert t.total_reward == float(np.sum(t.rewards))
                assert -500 <= t.total_reward <= 0
            assert (t.total_reward > 0) == res.reached_goal if mode == "deceptive" else True


def test_batched_episodes_agree_with_single_episodes(params):
    config = canonical_maze("deceptive")
    seeds = [(3, i) for i in range(20)]
    batch = run_episodes(ARCH, params, config, seeds)
    for s, b in zip(seeds, batch):
        single = rollout(ARCH, params, config, s)
        assert b.env_steps == single.env_steps
        assert b.trajectory.final_position == pytest.approx(single.trajectory.final_position, abs=1e-4)


def test_evaluate_population_charges_budget(params):
    config = canonical_maze("sparse")
    zero = np.zeros(param_count(ARCH), dtype=np.float32)
    budget = StepBudget(10**9)
    results = evaluate_population(ARCH, [zero] * 51, config, (0, 1, 0), budget)
    assert len(results) == 51 and budget.used == 25_500
    assert evaluate_population(ARCH, [], config, (0, 1, 0), budget) == []
    assert budget.used == 25_500


def test_evaluate_population_order_and_parallelism(params):
    config = canonical_maze("deceptive")
    rng = np.random.default_rng(4)
    pop = [init_params(ARCH, rng) for _ in range(6)]
    serial = evaluate_population(ARCH, pop, config, (1, 1, 3))
    with ProcessPoolExecutor(max_workers=3) as ex:
        parallel = evaluate_population(ARCH, pop, config, (1, 1, 3), executor=ex, workers=3)
    assert [r.fitness for r in serial] == [r.fitness for r in parallel]
    for i, r in enumerate(serial):
        assert r.fitness == rollout(ARCH, pop[i], config, (1, 1, 3, i, 0)).fitness


def test_validate_single_episode_equals_rollout(params):
    config = canonical_maze("deceptive")
    assert validate(ARCH, params, config, 1, (9, 3, 0)) == rollout(ARCH, params, config, (9, 3, 0, 0)).fitness


def test_validate_deterministic_env_has_no_spread(params):
    config = canonical_maze("deceptive", start_jitter=0.0)
    single = rollout(ARCH, params, config, (0,)).fitness
    assert validate(ARCH, params, config, 100, (0, 3, 5)) == pytest.approx(single, rel=1e-5)
    sparse = canonical_maze("sparse", start_jitter=0.0)
    assert validate(ARCH, params, sparse, 100) == rollout(ARCH, params, sparse, (0,)).fitness


def test_validate_does_not_touch_other_streams(params):
    evo = stream_rng(0, 0)
    expected = stream_rng(0, 0).random()
    validate(ARCH, params, canonical_maze("deceptive"), 20, (0, 3, 0))
    assert evo.random() == expected


def test_validate_rejects_zero_episodes(params):
    with pytest.raises(ValueError):
        validate(ARCH, params, canonical_maze(), 0)


def test_discrete_policy_rejected_for_maze():
    from eyal.policy_net import Architecture

    arch = Architecture(4, (4,), 2, output_mode="discrete_argmax")
    with pytest.raises(ValueError):
        rollout(arch, np.zeros(param_count(arch), dtype=np.float32), canonical_maze(), 0)
