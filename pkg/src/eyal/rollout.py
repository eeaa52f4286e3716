"""Episode execution, step budgeting, validation and seeding.

Randomness is split into named streams derived from the trial seed. Episode
seeds are entropy tuples ``(trial_seed, stream, generation, index, repeat)``
fed to :class:`numpy.random.SeedSequence`, which hashes them into independent
generator states; a rollout therefore depends only on its own tuple and never
on scheduling or on what else ran before it.
"""

from __future__ import annotations

import math
from concurrent.futures import Executor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import maze_env
from .maze_env import MazeConfig, Trajectory
from .policy_net import Architecture, OutputMode, forward_layers, unflatten

STREAM_EVOLUTION = 0
STREAM_ENV = 1
STREAM_ARCHIVE = 2
STREAM_VALIDATION = 3

# Below this many episodes, per-episode loops beat batched matmuls.
BATCH_MIN_EPISODES = 16

EpisodeSeed = int | Sequence[int]


def stream_rng(trial_seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([trial_seed, stream]))


def episode_rng(seed: EpisodeSeed) -> np.random.Generator:
    entropy = [seed] if isinstance(seed, (int, np.integer)) else list(seed)
    return np.random.default_rng(np.random.SeedSequence(entropy))


def maze_architecture(hidden_dims: Sequence[int] = (256, 256)) -> Architecture:
    return Architecture(
        input_dim=maze_env.OBS_DIM,
        hidden_dims=tuple(hidden_dims),
        output_dim=maze_env.ACTION_DIM,
        output_mode=OutputMode.CONTINUOUS_BOUNDED,
    )


@dataclass
class RolloutResult:
    trajectory: Trajectory
    fitness: float
    env_steps: int
    reached_goal: bool = False


@dataclass
class StepBudget:
    max: int
    used: int = 0

    def charge(self, steps: int) -> None:
        if steps < 0:
            raise ValueError("cannot refund steps")
        self.used += int(steps)

    @property
    def exhausted(self) -> bool:
        return self.used >= self.max


def run_episodes(arch: Architecture, params: np.ndarray, config: MazeConfig,
                 seeds: Sequence[EpisodeSeed]) -> list[RolloutResult]:
    """Run one policy for ``len(seeds)`` independent episodes in lock-step."""
    if arch.output_mode is not OutputMode.CONTINUOUS_BOUNDED or arch.output_dim != maze_env.ACTION_DIM:
        raise ValueError("maze policies need a continuous_bounded 2-D output")
    if arch.input_dim != maze_env.OBS_DIM:
        raise ValueError(f"maze observations have {maze_env.OBS_DIM} components, not {arch.input_dim}")
    n = len(seeds)
    if n == 0:
        return []
    layers = unflatten(arch, params)
    if n < BATCH_MIN_EPISODES:
        return [_single_episode(layers, config, s) for s in seeds]
    horizon = config.max_steps

    pos = np.array([maze_env.sample_start(config, episode_rng(s)) for s in seeds], dtype=float)
    obs = maze_env.batch_observe(config, pos)
    obs_hist = np.empty((horizon + 1, n, maze_env.OBS_DIM))
    act_hist = np.empty((horizon, n, maze_env.ACTION_DIM))
    rew_hist = np.empty((horizon, n))
    obs_hist[0] = obs
    totals = np.zeros(n)
    lengths = np.zeros(n, dtype=int)
    reached_any = np.zeros(n, dtype=bool)

    live = np.arange(n)
    for t in range(horizon):
        actions = forward_layers(layers, obs[live], arch.output_mode).astype(float)
        new_pos = maze_env.advance(config, pos[live], actions)
        dist = maze_env.goal_distance(config, new_pos)
        reached = dist <= config.goal_radius
        rewards = maze_env.batch_rewards(config, dist, reached)
        new_obs = maze_env.batch_observe(config, new_pos)

        pos[live] = new_pos
        obs[live] = new_obs
        obs_hist[t + 1, live] = new_obs
        act_hist[t, live] = actions
        rew_hist[t, live] = rewards
        totals[live] += rewards
        lengths[live] = t + 1
        reached_any[live] = reached
        live = live[~reached]
        if live.size == 0:
            break

    results = []
    for i in range(n):
        length = int(lengths[i])
        traj = Trajectory(
            observations=obs_hist[: length + 1, i].copy(),
            actions=act_hist[:length, i].copy(),
            rewards=rew_hist[:length, i].copy(),
            final_position=(float(pos[i, 0]), float(pos[i, 1])),
            length=length,
            total_reward=float(totals[i]),
        )
        results.append(RolloutResult(traj, float(totals[i]), length, bool(reached_any[i])))
    return results


def _single_episode(layers, config: MazeConfig, seed: EpisodeSeed) -> RolloutResult:
    horizon = config.max_steps
    x, y = maze_env.sample_start(config, episode_rng(seed))
    obs_rows = [maze_env.observe_one(config, x, y)]
    act_rows = []
    rewards = []
    total = 0.0
    reached = False
    for _ in range(horizon):
        h = np.array(obs_rows[-1], dtype=np.float32)
        for w, b in layers:
            h = np.tanh(w @ h + b)
        ax, ay = h.tolist()
        x, y = maze_env.advance_one(config, x, y, ax, ay)
        r, reached = maze_env.reward_one(config, x, y)
        obs_rows.append(maze_env.observe_one(config, x, y))
        act_rows.append((ax, ay))
        rewards.append(r)
        total += r
        if reached:
            break
    length = len(rewards)
    traj = Trajectory(
        observations=np.array(obs_rows),
        actions=np.array(act_rows),
        rewards=np.array(rewards),
        final_position=(x, y),
        length=length,
        total_reward=total,
    )
    return RolloutResult(traj, total, length, reached)


def rollout(arch: Architecture, params: np.ndarray, config: MazeConfig,
            episode_seed: EpisodeSeed) -> RolloutResult:
    return run_episodes(arch, params, config, [episode_seed])[0]


def _rollout_task(task):
    arch, params, config, seed = task
    return rollout(arch, params, config, seed)


def evaluate_population(arch: Architecture, population: Sequence[np.ndarray], config: MazeConfig,
                        generation_seed: Sequence[int], budget: StepBudget | None = None,
                        executor: Executor | None = None, workers: int = 1) -> list[RolloutResult]:
    """One rollout per individual, seeded by ``(*generation_seed, index, 0)``.

    Results keep population order whatever the executor does, and the budget
    is charged once with the total after collection.
    """
    tasks = [(arch, p, config, (*generation_seed, i, 0)) for i, p in enumerate(population)]
    if executor is None or len(tasks) <= 1:
        results = [_rollout_task(t) for t in tasks]
    else:
        chunk = max(1, math.ceil(len(tasks) / max(1, workers)))
        results = list(executor.map(_rollout_task, tasks, chunksize=chunk))
    if budget is not None:
        budget.charge(sum(r.env_steps for r in results))
    return results


def validate(arch: Architecture, params: np.ndarray, config: MazeConfig, n_episodes: int = 100,
             validation_seed: Sequence[int] = (0, STREAM_VALIDATION)) -> float:
    """Mean fitness over ``n_episodes`` fresh episodes; never charged to a training budget."""
    if n_episodes < 1:
        raise ValueError("n_episodes must be at least 1")
    seeds = [(*validation_seed, e) for e in range(n_episodes)]
    results = run_episodes(arch, params, config, seeds)
    return math.fsum(r.fitness for r in results) / n_episodes
