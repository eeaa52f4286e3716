"""Genetic Algorithm, Novelty Search, EyAL and Random Search generation loops.

All four share one generation skeleton: build the population, roll every
individual out once, extract a robust elite, then (for the novelty-driven
algorithms) score behaviours and update the archive. They differ only in how
the next population is bred:

* GA keeps the ``T`` fittest and breeds ``M - 1`` mutated children from them.
* NS does the same but ranks by novelty.
* EyAL breeds ``floor(gamma * (M - 1))`` children from the most novel ``T`` and
  the rest from the fittest ``T``; gamma drops by ``beta`` when the robust elite
  score improves on the previous generation and grows by ``alpha`` otherwise.
* RS samples ``M`` fresh networks every generation.

The elite always fills the last population slot.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import Executor
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence, TypeVar

import numpy as np

from .maze_env import OBS_DIM, MazeConfig
from .novelty import NoveltyArchive, behavior_characteristic, novelty_scores
from .policy_net import PARAM_DTYPE, Architecture, init_params
from .rollout import (
    STREAM_ARCHIVE,
    STREAM_ENV,
    STREAM_EVOLUTION,
    RolloutResult,
    StepBudget,
    evaluate_population,
    rollout,
    stream_rng,
)

T = TypeVar("T")

# Absorbs float drift from repeated +alpha/-beta updates before flooring.
_NICHE_EPS = 1e-9


class Algorithm(str, Enum):
    GA = "ga"
    NS = "ns"
    EYAL = "eyal"
    RS = "rs"


class BudgetExhausted(RuntimeError):
    pass


@dataclass
class EvoConfig:
    popsize: int = 51
    truncation: int = 20
    mutation_power: float = 0.005
    # "variance": noise ~ N(0, mutation_power); "std": noise ~ N(0, mutation_power**2).
    mutation_interpretation: str = "variance"
    elite_candidates: int = 5
    elite_robustness: int = 5
    gamma0: float = 0.75
    alpha: float = 0.1
    beta: float = 0.1
    max_training_steps: int = 2_000_000
    novelty_k: int = 25
    archive_pr: float = 0.01
    bc_mode: str = "maze_last_position"

    def __post_init__(self):
        if self.popsize < 1:
            raise ValueError("popsize must be positive")
        if not 1 <= self.truncation <= self.popsize:
            raise ValueError("truncation must lie in [1, popsize]")
        if not 1 <= self.elite_candidates <= self.popsize:
            raise ValueError("elite_candidates must lie in [1, popsize]")
        if self.elite_robustness < 1:
            raise ValueError("elite_robustness must be positive")
        if not 0.0 <= self.gamma0 <= 1.0:
            raise ValueError("gamma0 must lie in [0, 1]")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be non-negative")
        if self.mutation_power < 0:
            raise ValueError("mutation_power must be non-negative")
        if self.mutation_interpretation not in ("variance", "std"):
            raise ValueError("mutation_interpretation must be 'variance' or 'std'")
        if self.max_training_steps < 1:
            raise ValueError("max_training_steps must be positive")
        if self.novelty_k < 1:
            raise ValueError("novelty_k must be positive")
        if not 0.0 <= self.archive_pr <= 1.0:
            raise ValueError("archive_pr must lie in [0, 1]")

    @property
    def mutation_std(self) -> float:
        if self.mutation_interpretation == "variance":
            return math.sqrt(self.mutation_power)
        return self.mutation_power


@dataclass
class Individual:
    params: np.ndarray = field(repr=False)
    fitness: float = float("nan")
    bc: np.ndarray | None = None
    novelty: float = float("nan")


@dataclass
class EliteResult:
    index: int
    fitness: float
    steps_consumed: int
    rollouts: int
    partial: bool = False
    candidate_means: list[float] = field(default_factory=list)


@dataclass
class GenerationReport:
    generation: int
    elite_params: np.ndarray = field(repr=False)
    elite_fitness: float
    gamma: float
    training_steps_used: int
    wall_time: float
    population_steps: int = 0
    elite_steps: int = 0
    elite_rollouts: int = 0
    n_explore: int = 0
    n_exploit: int = 0
    parents: list[int] = field(default_factory=list, repr=False)


# -- operators ------------------------------------------------------------------


def truncation_indices(scores: Sequence[float], t: int) -> list[int]:
    """Indices of the ``t`` highest scores; ties go to the lower index."""
    scores = np.asarray(scores, dtype=float)
    if t > len(scores):
        raise ValueError(f"cannot keep {t} of {len(scores)} individuals")
    return [int(i) for i in np.argsort(-scores, kind="stable")[:t]]


def select_survivors(pop: Sequence[T], scores: Sequence[float], t: int) -> list[T]:
    if len(pop) != len(scores):
        raise ValueError("population and scores differ in length")
    return [pop[i] for i in truncation_indices(scores, t)]


def select_parents(survivors: Sequence[T], n: int, rng: np.random.Generator) -> list[T]:
    """``n`` uniform draws with replacement; ``n == 0`` draws nothing from ``rng``."""
    if n < 0:
        raise ValueError("n must be non-negative")
    if n == 0:
        return []
    if not survivors:
        raise ValueError("no survivors to select parents from")
    return [survivors[i] for i in rng.integers(0, len(survivors), size=n)]


def mutate(params: np.ndarray, sigma2: float, rng: np.random.Generator,
           interpretation: str = "variance") -> np.ndarray:
    """Add i.i.d. Gaussian noise. ``sigma2`` is the noise variance unless ``interpretation="std"``."""
    if sigma2 < 0:
        raise ValueError("mutation power must be non-negative")
    std = math.sqrt(sigma2) if interpretation == "variance" else sigma2
    noise = rng.normal(0.0, std, size=params.shape)
    return (params + noise).astype(PARAM_DTYPE)


def update_gamma(gamma: float, improved: bool, alpha: float, beta: float) -> float:
    gamma = gamma - beta if improved else gamma + alpha
    return min(1.0, max(0.0, gamma))


def niche_sizes(m: int, gamma: float) -> tuple[int, int]:
    """(explore, exploit) child counts; the elite takes the remaining slot."""
    if m < 1:
        raise ValueError("population size must be positive")
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    n_explore = min(m - 1, math.floor(gamma * (m - 1) + _NICHE_EPS))
    return n_explore, (m - 1) - n_explore


def extract_elite(fitnesses: Sequence[float], candidates: int, robustness: int,
                  rollout_fn: Callable[[int, int], RolloutResult],
                  step_limit: int | None = None) -> EliteResult:
    """Re-evaluate the ``candidates`` fittest individuals ``robustness`` times each.

    ``rollout_fn(index, repeat)`` runs one fresh episode of individual ``index``
    (``repeat`` counts from 1). The candidate with the highest mean wins, ties
    going to the better-ranked candidate. When ``step_limit`` runs out part-way
    the best fully evaluated candidate is returned with ``partial=True``.
    """
    order = truncation_indices(fitnesses, candidates)
    best_index, best_mean = order[0], -math.inf
    means: list[float] = []
    steps = 0
    rollouts = 0
    for idx in order:
        if step_limit is not None and steps >= step_limit:
            break
        scores = []
        for rep in range(1, robustness + 1):
            res = rollout_fn(idx, rep)
            steps += res.env_steps
            rollouts += 1
            scores.append(res.fitness)
            if step_limit is not None and steps >= step_limit and rep < robustness:
                break
        if len(scores) < robustness:
            break
        mean = math.fsum(scores) / robustness
        means.append(mean)
        if mean > best_mean:
            best_index, best_mean = idx, mean
    partial = len(means) < len(order)
    if not means:
        best_mean = float(fitnesses[best_index])
    return EliteResult(best_index, best_mean, steps, rollouts, partial, means)


# -- generation loop --------------------------------------------------------------


@dataclass
class EvolutionState:
    algorithm: Algorithm
    gamma: float
    budget: StepBudget
    evo_rng: np.random.Generator
    archive_rng: np.random.Generator | None
    archive: NoveltyArchive | None
    generation: int = 0
    population: list[np.ndarray] = field(default_factory=list, repr=False)
    fitnesses: np.ndarray | None = None
    novelty: np.ndarray | None = None
    elite_params: np.ndarray | None = field(default=None, repr=False)
    elite_fitness: float | None = None


@dataclass
class EvolutionContext:
    arch: Architecture
    maze: MazeConfig
    config: EvoConfig
    trial_seed: int
    executor: Executor | None = None
    workers: int = 1


def init_state(algorithm: Algorithm | str, config: EvoConfig, trial_seed: int) -> EvolutionState:
    algorithm = Algorithm(algorithm)
    uses_novelty = algorithm in (Algorithm.NS, Algorithm.EYAL)
    if algorithm is Algorithm.EYAL:
        gamma = config.gamma0
    else:
        gamma = 1.0 if algorithm is Algorithm.NS else 0.0
    bc_dim = 2 if config.bc_mode == "maze_last_position" else OBS_DIM + 1
    return EvolutionState(
        algorithm=algorithm,
        gamma=gamma,
        budget=StepBudget(config.max_training_steps),
        evo_rng=stream_rng(trial_seed, STREAM_EVOLUTION),
        archive_rng=stream_rng(trial_seed, STREAM_ARCHIVE) if uses_novelty else None,
        archive=NoveltyArchive(bc_dim, config.archive_pr) if uses_novelty else None,
    )


def _breed(state: EvolutionState, ctx: EvolutionContext) -> tuple[list[np.ndarray], list[int], int, int]:
    cfg = ctx.config
    m = cfg.popsize
    rng = state.evo_rng
    if state.generation == 0 or state.algorithm is Algorithm.RS:
        return [init_params(ctx.arch, rng) for _ in range(m)], [], 0, 0

    everyone = list(range(len(state.population)))
    if state.algorithm is Algorithm.GA:
        survivors = select_survivors(everyone, state.fitnesses, cfg.truncation)
        parents = select_parents(survivors, m - 1, rng)
        n_explore, n_exploit = 0, m - 1
    elif state.algorithm is Algorithm.NS:
        survivors = select_survivors(everyone, state.novelty, cfg.truncation)
        parents = select_parents(survivors, m - 1, rng)
        n_explore, n_exploit = m - 1, 0
    else:
        n_explore, n_exploit = niche_sizes(m, state.gamma)
        exploring = select_survivors(everyone, state.novelty, cfg.truncation)
        exploiting = select_survivors(everyone, state.fitnesses, cfg.truncation)
        parents = select_parents(exploring, n_explore, rng) + select_parents(exploiting, n_exploit, rng)

    children = [
        mutate(state.population[i], cfg.mutation_power, rng, cfg.mutation_interpretation)
        for i in parents
    ]
    return children + [state.elite_params], parents, n_explore, n_exploit


def run_generation(state: EvolutionState, ctx: EvolutionContext) -> GenerationReport:
    """Advance ``state`` by one generation in place and report its elite."""
    if state.budget.exhausted:
        raise BudgetExhausted(f"budget of {state.budget.max} steps already used")
    started = time.perf_counter()
    cfg = ctx.config
    g = state.generation

    population, parents, n_explore, n_exploit = _breed(state, ctx)

    steps_before = state.budget.used
    results = evaluate_population(ctx.arch, population, ctx.maze, (ctx.trial_seed, STREAM_ENV, g),
                                  state.budget, ctx.executor, ctx.workers)
    population_steps = state.budget.used - steps_before
    fitnesses = np.array([r.fitness for r in results])

    def robustness_rollout(idx: int, rep: int) -> RolloutResult:
        return rollout(ctx.arch, population[idx], ctx.maze, (ctx.trial_seed, STREAM_ENV, g, idx, rep))

    elite = extract_elite(fitnesses, cfg.elite_candidates, cfg.elite_robustness, robustness_rollout)
    state.budget.charge(elite.steps_consumed)

    if state.algorithm is Algorithm.EYAL and state.elite_fitness is not None:
        improved = elite.fitness > state.elite_fitness
        state.gamma = update_gamma(state.gamma, improved, cfg.alpha, cfg.beta)

    novelty = None
    if state.archive is not None:
        bcs = [behavior_characteristic(r.trajectory, cfg.bc_mode, ctx.maze.max_steps) for r in results]
        novelty = novelty_scores(bcs, state.archive, cfg.novelty_k)
        state.archive.update(bcs, state.archive_rng)

    state.population = population
    state.fitnesses = fitnesses
    state.novelty = novelty
    state.elite_params = population[elite.index]
    state.elite_fitness = elite.fitness
    state.generation = g + 1

    return GenerationReport(
        generation=g,
        elite_params=state.elite_params,
        elite_fitness=elite.fitness,
        gamma=state.gamma,
        training_steps_used=state.budget.used,
        wall_time=time.perf_counter() - started,
        population_steps=population_steps,
        elite_steps=elite.steps_consumed,
        elite_rollouts=elite.rollouts,
        n_explore=n_explore,
        n_exploit=n_exploit,
        parents=list(parents),
    )


def population_individuals(state: EvolutionState) -> list[Individual]:
    """The current population as :class:`Individual` records."""
    out = []
    for i, p in enumerate(state.population):
        fit = float(state.fitnesses[i]) if state.fitnesses is not None else float("nan")
        nov = float(state.novelty[i]) if state.novelty is not None else float("nan")
        out.append(Individual(params=p, fitness=fit, novelty=nov))
    return out
