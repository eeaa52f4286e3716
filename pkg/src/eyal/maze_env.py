"""Deterministic 2D point-mass maze with a pocket obstacle between start and goal.

The agent is a point moved by ``action * step_size`` each step with per-axis
sliding collisions: the x displacement is attempted first, then y, and a move
that would cross a wall face or leave the arena is cancelled on that axis only.

Two reward functions are provided:

* ``sparse``: -1 on every step that does not reach the goal, 0 on the step that
  does, so an episode escaping on step ``n`` scores ``-(n - 1)`` and a timed-out
  500-step episode scores -500.
* ``deceptive``: minus the Euclidean distance to the goal after each step, or
  +10000 on the step that reaches it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import yaml

GOAL_BONUS = 10_000.0
OBS_DIM = 4
ACTION_DIM = 2
REWARD_MODES = ("sparse", "deceptive")

CANONICAL_MAZE_YAML = """\
# Pocket maze: a U-shaped obstacle opening toward the start sits between the
# start (top) and the goal (bottom). Walls are segments with a thickness
# centred on the segment.
arena: [-5.0, 5.0, -5.0, 5.0]   # xmin, xmax, ymin, ymax
walls:
  - {from: [-2.0, 1.0], to: [2.0, 1.0], thickness: 0.2}
  - {from: [-2.0, 1.0], to: [-2.0, 2.5], thickness: 0.2}
  - {from: [2.0, 1.0], to: [2.0, 2.5], thickness: 0.2}
start: [0.0, 3.0]
goal: [0.0, -3.0]
goal_radius: 0.5
step_size: 0.05
max_steps: 500
reward_mode: deceptive
start_jitter: 0.1
"""


class ContractViolation(RuntimeError):
    """Raised when an environment is driven outside its protocol."""


@dataclass(frozen=True)
class Wall:
    start: tuple[float, float]
    end: tuple[float, float]
    thickness: float

    def __post_init__(self):
        (x0, y0), (x1, y1) = self.start, self.end
        if x0 != x1 and y0 != y1:
            raise ValueError(f"wall {self.start}->{self.end} is not axis-aligned")
        if self.thickness <= 0:
            raise ValueError("wall thickness must be positive")

    @property
    def rect(self) -> tuple[float, float, float, float]:
        """Solid region as (xmin, xmax, ymin, ymax); thickness is added across the segment only."""
        (x0, y0), (x1, y1) = self.start, self.end
        half = self.thickness / 2
        xmin, xmax = min(x0, x1), max(x0, x1)
        ymin, ymax = min(y0, y1), max(y0, y1)
        if y0 == y1:
            return xmin, xmax, ymin - half, ymax + half
        return xmin - half, xmax + half, ymin, ymax


@dataclass(frozen=True)
class MazeConfig:
    arena: tuple[float, float, float, float] = (-5.0, 5.0, -5.0, 5.0)
    walls: tuple[Wall, ...] = ()
    start: tuple[float, float] = (0.0, 3.0)
    goal: tuple[float, float] = (0.0, -3.0)
    goal_radius: float = 0.5
    step_size: float = 0.05
    max_steps: int = 500
    reward_mode: str = "deceptive"
    start_jitter: float = 0.1

    def __post_init__(self):
        xmin, xmax, ymin, ymax = self.arena
        if not (xmin < xmax and ymin < ymax):
            raise ValueError(f"degenerate arena {self.arena}")
        if self.goal_radius <= 0:
            raise ValueError("goal_radius must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be positive")
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if self.start_jitter < 0:
            raise ValueError("start_jitter must be non-negative")
        if self.reward_mode not in REWARD_MODES:
            raise ValueError(f"reward_mode must be one of {REWARD_MODES}, got {self.reward_mode!r}")
        for name in ("start", "goal"):
            x, y = getattr(self, name)
            if not (xmin < x < xmax and ymin < y < ymax):
                raise ValueError(f"{name} {(x, y)} is not strictly inside the arena")
            if not self.is_free(x, y):
                raise ValueError(f"{name} {(x, y)} lies inside a wall")

    @cached_property
    def wall_rects(self) -> np.ndarray:
        if not self.walls:
            return np.zeros((0, 4))
        return np.array([w.rect for w in self.walls], dtype=float)

    @cached_property
    def wall_rect_tuples(self) -> tuple[tuple[float, float, float, float], ...]:
        return tuple(w.rect for w in self.walls)

    @property
    def half_extent(self) -> float:
        xmin, xmax, ymin, ymax = self.arena
        return max(xmax - xmin, ymax - ymin) / 2

    def is_free(self, x: float, y: float) -> bool:
        """True when (x, y) is inside the arena (boundary included) and outside every wall interior."""
        xmin, xmax, ymin, ymax = self.arena
        if not (xmin <= x <= xmax and ymin <= y <= ymax):
            return False
        for w in self.walls:
            x0, x1, y0, y1 = w.rect
            if x0 < x < x1 and y0 < y < y1:
                return False
        return True

    def with_(self, **changes: Any) -> "MazeConfig":
        data = {f: getattr(self, f) for f in self.__dataclass_fields__}
        data.update(changes)
        return MazeConfig(**data)


@dataclass(frozen=True)
class EnvState:
    position: tuple[float, float]
    step_index: int = 0
    done: bool = False
    reached_goal: bool = False


@dataclass
class Trajectory:
    observations: np.ndarray = field(repr=False)
    actions: np.ndarray = field(repr=False)
    rewards: np.ndarray = field(repr=False)
    final_position: tuple[float, float]
    length: int
    total_reward: float


# -- configuration I/O --------------------------------------------------------


def maze_config_from_dict(data: dict) -> MazeConfig:
    try:
        walls = tuple(
            Wall(tuple(map(float, w["from"])), tuple(map(float, w["to"])), float(w.get("thickness", 0.2)))
            for w in data.get("walls", [])
        )
    except KeyError as exc:
        raise ValueError(f"each wall needs 'from' and 'to' points (missing {exc})") from None
    kwargs: dict[str, Any] = {"walls": walls}
    for key in ("arena", "start", "goal"):
        if key in data:
            kwargs[key] = tuple(float(v) for v in data[key])
    for key, cast in (
        ("goal_radius", float),
        ("step_size", float),
        ("max_steps", int),
        ("reward_mode", str),
        ("start_jitter", float),
    ):
        if key in data:
            kwargs[key] = cast(data[key])
    unknown = set(data) - {"walls", "arena", "start", "goal", "goal_radius", "step_size",
                           "max_steps", "reward_mode", "start_jitter"}
    if unknown:
        raise ValueError(f"unknown maze config keys: {sorted(unknown)}")
    return MazeConfig(**kwargs)


def maze_config_to_dict(config: MazeConfig) -> dict:
    return {
        "arena": list(config.arena),
        "walls": [
            {"from": list(w.start), "to": list(w.end), "thickness": w.thickness} for w in config.walls
        ],
        "start": list(config.start),
        "goal": list(config.goal),
        "goal_radius": config.goal_radius,
        "step_size": config.step_size,
        "max_steps": config.max_steps,
        "reward_mode": config.reward_mode,
        "start_jitter": config.start_jitter,
    }


def load_maze_config(path: str | Path) -> MazeConfig:
    with open(path) as fh:
        return maze_config_from_dict(yaml.safe_load(fh))


def canonical_maze(reward_mode: str = "deceptive", **overrides: Any) -> MazeConfig:
    data = yaml.safe_load(CANONICAL_MAZE_YAML)
    data["reward_mode"] = reward_mode
    data.update(overrides)
    return maze_config_from_dict(data)


# -- batched kernels ------------------------------------------------------------
# Every kernel works elementwise on a batch of independent episodes, so one
# episode's result never depends on what else is in the batch.


def _blocked(config: MazeConfig, along: np.ndarray, new_along: np.ndarray,
             across: np.ndarray, axis: int) -> np.ndarray:
    xmin, xmax, ymin, ymax = config.arena
    lo, hi = (xmin, xmax) if axis == 0 else (ymin, ymax)
    blocked = (new_along < lo) | (new_along > hi)
    rects = config.wall_rects
    if len(rects):
        if axis == 0:
            a0, a1, c0, c1 = rects[:, 0], rects[:, 1], rects[:, 2], rects[:, 3]
        else:
            c0, c1, a0, a1 = rects[:, 0], rects[:, 1], rects[:, 2], rects[:, 3]
        seg_lo = np.minimum(along, new_along)[:, None]
        seg_hi = np.maximum(along, new_along)[:, None]
        c = across[:, None]
        hit = (c > c0) & (c < c1) & (seg_hi > a0) & (seg_lo < a1)
        blocked |= hit.any(axis=1)
    return blocked


def advance(config: MazeConfig, positions: np.ndarray, actions: np.ndarray) -> np.ndarray:
    """Apply one sliding-collision move to a ``(B, 2)`` batch of positions."""
    a = np.clip(np.asarray(actions, dtype=float), -1.0, 1.0)
    x = positions[:, 0]
    y = positions[:, 1]
    nx = x + a[:, 0] * config.step_size
    x = np.where(_blocked(config, x, nx, y, 0), x, nx)
    ny = y + a[:, 1] * config.step_size
    y = np.where(_blocked(config, y, ny, x, 1), y, ny)
    return np.stack([x, y], axis=1)


def goal_distance(config: MazeConfig, positions: np.ndarray) -> np.ndarray:
    dx = positions[:, 0] - config.goal[0]
    dy = positions[:, 1] - config.goal[1]
    return np.sqrt(dx * dx + dy * dy)


def batch_rewards(config: MazeConfig, distance: np.ndarray, reached: np.ndarray) -> np.ndarray:
    if config.reward_mode == "deceptive":
        return np.where(reached, GOAL_BONUS, -distance)
    return np.where(reached, 0.0, -1.0)


def batch_observe(config: MazeConfig, positions: np.ndarray) -> np.ndarray:
    s = config.half_extent
    gx, gy = config.goal
    x = positions[:, 0]
    y = positions[:, 1]
    return np.stack([x / s, y / s, (gx - x) / s, (gy - y) / s], axis=1)


def sample_start(config: MazeConfig, rng: np.random.Generator) -> tuple[float, float]:
    """Start position plus a uniform draw from the jitter disc, redrawn until legal."""
    sx, sy = config.start
    r = config.start_jitter
    if r == 0:
        return (float(sx), float(sy))
    while True:
        u, v = rng.uniform(-r, r, size=2)
        if u * u + v * v <= r * r and config.is_free(sx + u, sy + v):
            return (float(sx + u), float(sy + v))


# -- single-episode API ------------------------------------------------------------
# Plain-float twin of the batched kernels; used by step() and by one-episode
# rollouts, where numpy call overhead would dominate.


def _axis_blocked(arena_lo: float, arena_hi: float, rects, along: float, new_along: float,
                  across: float, axis: int) -> bool:
    if new_along < arena_lo or new_along > arena_hi:
        return True
    lo, hi = (along, new_along) if along <= new_along else (new_along, along)
    for x0, x1, y0, y1 in rects:
        a0, a1, c0, c1 = (x0, x1, y0, y1) if axis == 0 else (y0, y1, x0, x1)
        if c0 < across < c1 and hi > a0 and lo < a1:
            return True
    return False


def advance_one(config: MazeConfig, x: float, y: float, ax: float, ay: float) -> tuple[float, float]:
    ax = min(1.0, max(-1.0, ax))
    ay = min(1.0, max(-1.0, ay))
    xmin, xmax, ymin, ymax = config.arena
    rects = config.wall_rect_tuples
    nx = x + ax * config.step_size
    if not _axis_blocked(xmin, xmax, rects, x, nx, y, 0):
        x = nx
    ny = y + ay * config.step_size
    if not _axis_blocked(ymin, ymax, rects, y, ny, x, 1):
        y = ny
    return x, y


def reward_one(config: MazeConfig, x: float, y: float) -> tuple[float, bool]:
    """(reward, reached_goal) for the position reached after a step."""
    dx = x - config.goal[0]
    dy = y - config.goal[1]
    dist = math.sqrt(dx * dx + dy * dy)
    reached = dist <= config.goal_radius
    if config.reward_mode == "deceptive":
        return (GOAL_BONUS if reached else -dist), reached
    return (0.0 if reached else -1.0), reached


def observe_one(config: MazeConfig, x: float, y: float) -> list[float]:
    s = config.half_extent
    gx, gy = config.goal
    return [x / s, y / s, (gx - x) / s, (gy - y) / s]



def compute_reward(mode: str, position_after: Sequence[float], reached_goal: bool,
                   goal: Sequence[float]) -> float:
    if mode == "deceptive":
        if reached_goal:
            return GOAL_BONUS
        dx = position_after[0] - goal[0]
        dy = position_after[1] - goal[1]
        return -math.sqrt(dx * dx + dy * dy)
    if mode == "sparse":
        return 0.0 if reached_goal else -1.0
    raise ValueError(f"unknown reward mode {mode!r}")


def observe(config: MazeConfig, state: EnvState) -> np.ndarray:
    return np.array(observe_one(config, *state.position))


def reset(config: MazeConfig, rng: np.random.Generator) -> tuple[EnvState, np.ndarray]:
    state = EnvState(position=sample_start(config, rng))
    return state, observe(config, state)


def step(config: MazeConfig, state: EnvState, action: Sequence[float]
         ) -> tuple[EnvState, float, np.ndarray, bool]:
    if state.done:
        raise ContractViolation("step() called on a finished episode; call reset() first")
    ax, ay = (float(a) for a in action)
    x, y = advance_one(config, state.position[0], state.position[1], ax, ay)
    reward, reached = reward_one(config, x, y)
    step_index = state.step_index + 1
    done = reached or step_index == config.max_steps
    new_state = EnvState(position=(x, y), step_index=step_index, done=done, reached_goal=reached)
    return new_state, reward, observe(config, new_state), done
