"""Single trials: train, validate every generation's elite, persist as CSV + JSON."""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from ..evo_core import (
    Algorithm,
    EvoConfig,
    EvolutionContext,
    GenerationReport,
    init_state,
    run_generation,
)
from ..maze_env import MazeConfig, canonical_maze
from ..rollout import STREAM_VALIDATION, maze_architecture, validate

log = logging.getLogger(__name__)

TRIAL_COLUMNS = ("generation", "training_steps_used", "elite_fitness", "gamma",
                 "validation_score", "wall_time_s")

ENVIRONMENTS = {"sparse": "PointMazeSparse", "deceptive": "PointMazeDeceptive"}
ENV_SHORT = {v: k for k, v in ENVIRONMENTS.items()}


def env_long_name(env: str) -> str:
    if env in ENVIRONMENTS:
        return ENVIRONMENTS[env]
    if env in ENV_SHORT:
        return env
    raise ValueError(f"unknown environment {env!r}; choose from {sorted(ENVIRONMENTS)}")


@dataclass
class TrialRow:
    generation: int
    training_steps_used: int
    elite_fitness: float
    gamma: float
    validation_score: float
    wall_time_s: float


@dataclass
class TrialRecord:
    algorithm: str
    environment: str
    trial_seed: int
    reports: list[GenerationReport] = field(default_factory=list, repr=False)
    validation_scores: list[float] = field(default_factory=list)
    rows: list[TrialRow] = field(default_factory=list, repr=False)
    population_steps: list[int] = field(default_factory=list, repr=False)
    elite_steps: list[int] = field(default_factory=list, repr=False)
    elite_rollouts: list[int] = field(default_factory=list, repr=False)
    max_training_steps: int = 0
    status: str = "ok"
    error: str = ""
    evo: dict = field(default_factory=dict, repr=False)

    @property
    def trial_score(self) -> float:
        return max(self.validation_scores) if self.validation_scores else -math.inf


def trial_stem(algorithm: str, environment: str, seed: int) -> str:
    return f"{Algorithm(algorithm).value}_{ENV_SHORT[env_long_name(environment)]}_seed{seed}"


def _fmt(v: float) -> str:
    return repr(float(v))


def format_row(row: TrialRow) -> list[str]:
    return [str(row.generation), str(row.training_steps_used), _fmt(row.elite_fitness),
            _fmt(row.gamma), _fmt(row.validation_score), _fmt(row.wall_time_s)]


def write_trial_csv(rows: list[TrialRow], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRIAL_COLUMNS)
        writer.writerows(format_row(r) for r in rows)


def read_trial_csv(path: str | Path) -> list[TrialRow]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != TRIAL_COLUMNS:
            raise ValueError(f"{path}: unexpected trial CSV header {reader.fieldnames}")
        return [
            TrialRow(int(r["generation"]), int(r["training_steps_used"]), float(r["elite_fitness"]),
                     float(r["gamma"]), float(r["validation_score"]), float(r["wall_time_s"]))
            for r in reader
        ]


def _write_meta(record: TrialRecord, path: Path) -> None:
    meta = {
        "algorithm": record.algorithm,
        "environment": record.environment,
        "trial_seed": record.trial_seed,
        "max_training_steps": record.max_training_steps,
        "status": record.status,
        "error": record.error,
        "trial_score": record.trial_score if record.validation_scores else None,
        "population_steps": record.population_steps,
        "elite_steps": record.elite_steps,
        "elite_rollouts": record.elite_rollouts,
        "evo": record.evo,
    }
    path.write_text(json.dumps(meta, indent=1) + "\n")


def load_trial(csv_path: str | Path) -> TrialRecord:
    """Rebuild a record (without parameter vectors) from its CSV and JSON sidecar."""
    csv_path = Path(csv_path)
    meta = json.loads(csv_path.with_suffix(".json").read_text())
    rows = read_trial_csv(csv_path)
    return TrialRecord(
        algorithm=meta["algorithm"],
        environment=meta["environment"],
        trial_seed=meta["trial_seed"],
        validation_scores=[r.validation_score for r in rows],
        rows=rows,
        population_steps=meta.get("population_steps", []),
        elite_steps=meta.get("elite_steps", []),
        elite_rollouts=meta.get("elite_rollouts", []),
        max_training_steps=meta.get("max_training_steps", 0),
        status=meta.get("status", "ok"),
        error=meta.get("error", ""),
        evo=meta.get("evo", {}),
    )


def load_trials(directory: str | Path) -> list[TrialRecord]:
    return [load_trial(p) for p in sorted(Path(directory).glob("*.csv"))
            if p.with_suffix(".json").exists()]


def run_trial(
    algorithm: Algorithm | str,
    environment: str,
    seed: int,
    evo: EvoConfig | None = None,
    maze: MazeConfig | None = None,
    validation_episodes: int = 100,
    workers: int = 1,
    out_dir: str | Path | None = None,
    record_wall_time: bool = True,
    hidden_dims: tuple[int, ...] = (256, 256),
    on_generation: Callable[[GenerationReport, float], None] | None = None,
) -> TrialRecord:
    """Run one complete trial; rows are appended to ``out_dir`` as they are produced."""
    algorithm = Algorithm(algorithm)
    env_name = env_long_name(environment)
    evo = evo or EvoConfig()
    reward_mode = ENV_SHORT[env_name]
    if maze is None:
        maze = canonical_maze(reward_mode)
    elif maze.reward_mode != reward_mode:
        maze = maze.with_(reward_mode=reward_mode)

    record = TrialRecord(algorithm.value, env_name, seed, max_training_steps=evo.max_training_steps,
                         evo=dataclasses.asdict(evo))
    csv_path = meta_path = None
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        stem = trial_stem(algorithm.value, env_name, seed)
        csv_path, meta_path = out / f"{stem}.csv", out / f"{stem}.json"
        write_trial_csv([], csv_path)

    executor = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    ctx = EvolutionContext(maze_architecture(hidden_dims), maze, evo, seed, executor, workers)
    state = init_state(algorithm, evo, seed)
    started = time.perf_counter()
    try:
        while not state.budget.exhausted:
            report = run_generation(state, ctx)
            score = validate(ctx.arch, report.elite_params, maze, validation_episodes,
                             (seed, STREAM_VALIDATION, report.generation))
            wall = time.perf_counter() - started if record_wall_time else 0.0
            row = TrialRow(report.generation, report.training_steps_used, report.elite_fitness,
                           report.gamma, score, round(wall, 3))
            record.reports.append(report)
            record.validation_scores.append(score)
            record.rows.append(row)
            record.population_steps.append(report.population_steps)
            record.elite_steps.append(report.elite_steps)
            record.elite_rollouts.append(report.elite_rollouts)
            if csv_path is not None:
                with open(csv_path, "a", newline="") as fh:
                    csv.writer(fh, lineterminator="\n").writerow(format_row(row))
            if on_generation is not None:
                on_generation(report, score)
            log.debug("%s gen %d steps %d elite %.2f val %.2f gamma %.2f", algorithm.value,
                      report.generation, report.training_steps_used, report.elite_fitness,
                      score, report.gamma)
    finally:
        if executor is not None:
            executor.shutdown()
    if meta_path is not None:
        _write_meta(record, meta_path)
    return record


def mark_failed(record_args: dict, error: BaseException, out_dir: str | Path | None) -> TrialRecord:
    record = TrialRecord(
        Algorithm(record_args["algorithm"]).value,
        env_long_name(record_args["environment"]),
        record_args["seed"],
        status="failed",
        error=f"{type(error).__name__}: {error}",
    )
    if out_dir is not None:
        stem = trial_stem(record.algorithm, record.environment, record.trial_seed)
        _write_meta(record, Path(out_dir) / f"{stem}.json")
    return record
