"""Behaviour characterisation, k-nearest-neighbour novelty and the stochastic archive."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

import numpy as np

from .maze_env import Trajectory

BC_MODES = ("maze_last_position", "generic_last_obs_time")


def behavior_characteristic(traj: Trajectory, mode: str = "maze_last_position",
                            max_steps: int | None = None) -> np.ndarray:
    if traj.length < 1:
        raise ValueError("cannot characterise an empty trajectory")
    if mode == "maze_last_position":
        return np.array(traj.final_position, dtype=float)
    if mode == "generic_last_obs_time":
        if not max_steps:
            raise ValueError("generic_last_obs_time needs max_steps")
        last = np.asarray(traj.observations[-1], dtype=float)
        return np.append(last, traj.length / max_steps)
    raise ValueError(f"unknown behaviour characteristic mode {mode!r}")


class NoveltyArchive:
    """Append-only store of behaviour descriptors.

    Each candidate offered to :meth:`update` is inserted independently with
    probability ``insert_probability``.
    """

    def __init__(self, dim: int, insert_probability: float = 0.01):
        if not 0.0 <= insert_probability <= 1.0:
            raise ValueError("insert_probability must lie in [0, 1]")
        self.dim = dim
        self.insert_probability = insert_probability
        self._rows: list[np.ndarray] = []

    def __len__(self) -> int:
        return len(self._rows)

    @property
    def descriptors(self) -> np.ndarray:
        if not self._rows:
            return np.zeros((0, self.dim))
        return np.vstack(self._rows)

    def add(self, bc: np.ndarray) -> None:
        bc = np.asarray(bc, dtype=float)
        if bc.shape != (self.dim,):
            raise ValueError(f"descriptor shape {bc.shape} does not match archive dim {self.dim}")
        if not np.all(np.isfinite(bc)):
            raise ValueError("descriptor has non-finite entries")
        self._rows.append(bc.copy())

    def update(self, population_bcs: Sequence[np.ndarray], rng: np.random.Generator) -> int:
        """Offer every descriptor for insertion; returns how many were stored."""
        bcs = [np.asarray(b, dtype=float) for b in population_bcs]
        if not bcs:
            return 0
        keep = rng.random(len(bcs)) < self.insert_probability
        for bc, k in zip(bcs, keep):
            if k:
                self.add(bc)
        return int(keep.sum())

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"bc{i}" for i in range(self.dim)])
            for row in self._rows:
                writer.writerow([repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path: str | Path, insert_probability: float = 0.01) -> "NoveltyArchive":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            archive = cls(len(header), insert_probability)
            for row in reader:
                archive.add(np.array([float(v) for v in row]))
        return archive


def update_archive(archive: NoveltyArchive, population_bcs: Sequence[np.ndarray],
                   rng: np.random.Generator) -> NoveltyArchive:
    archive.update(population_bcs, rng)
    return archive


def _pairwise_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # Squared terms accumulated dimension by dimension in a fixed order, so the
    # result does not depend on how numpy would block a reduction.
    d2 = np.zeros((a.shape[0], b.shape[0]))
    for j in range(a.shape[1]):
        diff = a[:, j][:, None] - b[:, j][None, :]
        d2 += diff * diff
    return np.sqrt(d2)


def novelty_scores(population_bcs: Sequence[np.ndarray], archive: NoveltyArchive | np.ndarray | None,
                   k: int = 25) -> np.ndarray:
    """Mean distance from each individual to its ``k`` nearest reference points.

    The reference set of individual ``i`` is the archive plus every other member
    of the population. With fewer than ``k`` references all of them are used;
    with none the score is 0.
    """
    if k < 1:
        raise ValueError("k must be positive")
    pop = np.atleast_2d(np.asarray(population_bcs, dtype=float))
    n = pop.shape[0]
    if n == 0:
        raise ValueError("population must be non-empty")
    if archive is None:
        arc = np.zeros((0, pop.shape[1]))
    elif isinstance(archive, NoveltyArchive):
        arc = archive.descriptors
    else:
        arc = np.asarray(archive, dtype=float).reshape(-1, pop.shape[1])

    dist = np.concatenate([_pairwise_distances(pop, arc), _pairwise_distances(pop, pop)], axis=1)
    # Self-distance is excluded by pushing it past every real distance.
    dist[np.arange(n), arc.shape[0] + np.arange(n)] = np.inf
    n_ref = arc.shape[0] + n - 1
    kk = min(k, n_ref)
    if kk == 0:
        return np.zeros(n)
    nearest = np.sort(dist, axis=1)[:, :kk]
    # cumsum adds left to right, smallest distance first.
    return np.cumsum(nearest, axis=1)[:, -1] / kk
