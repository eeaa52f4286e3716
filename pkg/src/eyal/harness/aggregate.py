"""Forward-fill of sparse per-generation reports onto a fixed step grid, and CIs."""

from __future__ import annotations

import csv
import math
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .trial import TrialRecord

STATISTICS = ("best_so_far_validation", "elite_fitness")
CURVE_COLUMNS = ("step", "mean", "ci_low", "ci_high", "n")


@dataclass
class FilledSeries:
    steps: list[int]
    # None marks checkpoints before the trial's first report.
    values: list[float | None]


@dataclass
class CurvePoint:
    step: int
    mean: float
    ci_low: float
    ci_high: float
    n: int


@dataclass
class AggregateCurve:
    interval: int
    points: list[CurvePoint] = field(default_factory=list)
    label: str = ""


def report_series(record: TrialRecord, statistic: str) -> list[tuple[int, float]]:
    """(training_steps_used, value) per generation for one trial."""
    if statistic not in STATISTICS:
        raise ValueError(f"statistic must be one of {STATISTICS}")
    out = []
    best = -math.inf
    for row in record.rows:
        if statistic == "best_so_far_validation":
            best = max(best, row.validation_score)
            out.append((row.training_steps_used, best))
        else:
            out.append((row.training_steps_used, row.elite_fitness))
    return out


def fill_series(reports: Sequence[tuple[int, float]], interval: int,
                horizon: int | None = None) -> FilledSeries:
    """Value at every multiple of ``interval`` is that of the latest report at or before it.

    Checkpoints run from 0 to ``horizon`` (default: the last report rounded up
    to the grid).
    """
    if interval <= 0:
        raise ValueError("interval must be positive")
    if not reports:
        return FilledSeries([], [])
    if horizon is None:
        horizon = max(s for s, _ in reports)
    last_k = -(-horizon // interval)
    ordered = sorted(reports, key=lambda r: r[0])
    steps, values = [], []
    j = -1
    for k in range(last_k + 1):
        point = k * interval
        while j + 1 < len(ordered) and ordered[j + 1][0] <= point:
            j += 1
        steps.append(point)
        values.append(ordered[j][1] if j >= 0 else None)
    return FilledSeries(steps, values)


def forward_fill(records: Sequence[TrialRecord], interval: int = 10_000,
                 statistic: str = "best_so_far_validation",
                 horizon: int | None = None) -> list[FilledSeries]:
    """One filled series per trial, all on the same grid (shared horizon)."""
    series = [report_series(r, statistic) for r in records]
    if horizon is None:
        ends = [max(s for s, _ in rep) for rep in series if rep]
        horizon = max(ends) if ends else 0
    return [fill_series(rep, interval, horizon) for rep in series]


def mean_ci(values: Sequence[float], level: float = 0.95) -> tuple[float, float, float]:
    """Mean with a normal-approximation interval, ``z * s / sqrt(n)`` (z = 1.96 at 95%)."""
    if not values:
        raise ValueError("need at least one value")
    mean = math.fsum(values) / len(values)
    if len(values) == 1:
        return mean, mean, mean
    z = 1.96 if level == 0.95 else statistics.NormalDist().inv_cdf(0.5 + level / 2)
    half = z * statistics.stdev(values) / math.sqrt(len(values))
    return mean, mean - half, mean + half


def aggregate_curve(series: Sequence[FilledSeries], interval: int, level: float = 0.95,
                    label: str = "") -> AggregateCurve:
    """Average filled series point by point, using only trials with data there."""
    by_step: dict[int, list[float]] = {}
    for s in series:
        for step, value in zip(s.steps, s.values):
            if value is not None:
                by_step.setdefault(step, []).append(value)
    points = []
    for step in sorted(by_step):
        vals = by_step[step]
        mean, lo, hi = mean_ci(vals, level)
        points.append(CurvePoint(step, mean, lo, hi, len(vals)))
    return AggregateCurve(interval, points, label)


def write_curve_csv(curve: AggregateCurve, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CURVE_COLUMNS)
        for p in curve.points:
            writer.writerow([p.step, repr(p.mean), repr(p.ci_low), repr(p.ci_high), p.n])


def read_curve_csv(path: str | Path, label: str | None = None) -> AggregateCurve:
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CURVE_COLUMNS:
            raise ValueError(f"{path}: unexpected curve CSV header {reader.fieldnames}")
        points = [CurvePoint(int(r["step"]), float(r["mean"]), float(r["ci_low"]),
                             float(r["ci_high"]), int(r["n"])) for r in reader]
    interval = points[1].step - points[0].step if len(points) > 1 else 0
    return AggregateCurve(interval, points, label if label is not None else path.stem)
