"""Experiment configuration (YAML) and multi-trial sweeps."""

from __future__ import annotations

import dataclasses
import logging
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from ..evo_core import Algorithm, EvoConfig
from ..maze_env import MazeConfig, load_maze_config, maze_config_from_dict
from .trial import TrialRecord, env_long_name, mark_failed, run_trial

log = logging.getLogger(__name__)

PROFILES: dict[str, dict[str, int]] = {
    "desk": {"max_training_steps": 2_000_000, "trials": 10},
    "paper": {"max_training_steps": 50_000_000, "trials": 40},
}


@dataclass
class ExperimentConfig:
    algorithms: list[str] = field(default_factory=lambda: ["ga", "ns", "eyal"])
    environment: str = "deceptive"
    trials: int = 10
    seed: int = 0
    validation_episodes: int = 100
    interval: int = 10_000
    workers: int = 1
    out_dir: str = "runs"
    record_wall_time: bool = True
    hidden_dims: tuple[int, ...] = (256, 256)
    evo: EvoConfig = field(default_factory=EvoConfig)
    maze: MazeConfig | None = None

    def __post_init__(self):
        self.algorithms = [Algorithm(a).value for a in self.algorithms]
        env_long_name(self.environment)
        if self.trials < 1:
            raise ValueError("trials must be positive")
        if self.validation_episodes < 1:
            raise ValueError("validation_episodes must be positive")


def apply_profile(name: str) -> tuple[int, int]:
    """(max_training_steps, trials) for a named profile."""
    if name not in PROFILES:
        raise ValueError(f"unknown profile {name!r}; choose from {sorted(PROFILES)}")
    p = PROFILES[name]
    return p["max_training_steps"], p["trials"]


def experiment_config_from_dict(data: dict[str, Any], base_dir: Path | None = None) -> ExperimentConfig:
    data = dict(data)
    evo_data = dict(data.pop("evo", {}) or {})
    profile = data.pop("profile", None)
    trials = None
    if profile is not None:
        steps, trials = apply_profile(profile)
        evo_data.setdefault("max_training_steps", steps)
    if "env" in data:
        data["environment"] = data.pop("env")
    maze = None
    if "maze_file" in data:
        maze_path = Path(data.pop("maze_file"))
        if base_dir is not None and not maze_path.is_absolute():
            maze_path = base_dir / maze_path
        maze = load_maze_config(maze_path)
    if "maze" in data:
        maze = maze_config_from_dict(data.pop("maze"))
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown experiment config keys: {sorted(unknown)}")
    if "hidden_dims" in data:
        data["hidden_dims"] = tuple(data["hidden_dims"])
    if trials is not None:
        data.setdefault("trials", trials)
    return ExperimentConfig(evo=EvoConfig(**evo_data), maze=maze, **data)


def load_experiment_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    with open(path) as fh:
        return experiment_config_from_dict(yaml.safe_load(fh) or {}, path.parent)


def ensure_writable(directory: str | Path) -> Path:
    out = Path(directory)
    try:
        out.mkdir(parents=True, exist_ok=True)
        with tempfile.NamedTemporaryFile(dir=out, prefix=".probe"):
            pass
    except OSError as exc:
        raise OSError(f"output directory {out} is not writable: {exc}") from exc
    if not os.access(out, os.W_OK):
        raise OSError(f"output directory {out} is not writable")
    return out


def run_experiment(cfg: ExperimentConfig) -> list[TrialRecord]:
    """Run ``cfg.trials`` seeds (``seed + i``) for every algorithm, persisting each trial."""
    out = ensure_writable(cfg.out_dir)
    records = []
    for algorithm in cfg.algorithms:
        for i in range(cfg.trials):
            seed = cfg.seed + i
            log.info("trial %s %s seed %d", algorithm, cfg.environment, seed)
            try:
                record = run_trial(
                    algorithm, cfg.environment, seed, cfg.evo, cfg.maze,
                    validation_episodes=cfg.validation_episodes, workers=cfg.workers,
                    out_dir=out, record_wall_time=cfg.record_wall_time, hidden_dims=cfg.hidden_dims,
                )
            except Exception as exc:  # a broken trial must not sink the sweep
                log.warning("trial %s seed %d failed: %s", algorithm, seed, exc)
                record = mark_failed(
                    {"algorithm": algorithm, "environment": cfg.environment, "seed": seed}, exc, out)
            records.append(record)
    return records
