"""Trial scoring and aggregate evaluation reports.

Gather-balls completion: each ball strictly inside the goal triangle counts
one, a ball on an edge (within the geometric tolerance) counts half, per the
half-ball rule; per-side rates attribute balls by their initial cluster.
Success is completion >= delta for delta in {40%, 60%, 80%}.  Shelf trials
report per-stage success straight from the latched stage flags.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, List, Sequence

import numpy as np

from .errors import InvalidInputError, InvalidStateError
from .worlds import STAGE_NAMES, point_in_triangle_credit

SUCCESS_THRESHOLDS = (0.4, 0.6, 0.8)

EDGE_TOLERANCE_M = 1e-9

TASK_GATHER = "gather_balls"
TASK_SHELF = "curtained_shelf"


@dataclass
class TrialResult:
    """Scores for one completed trial."""

    task_id: str
    completion_overall: float = 0.0
    completion_left: float = 0.0
    completion_right: float = 0.0
    success_at: Dict[float, bool] = field(default_factory=dict)
    collided: bool = False
    stage_flags: Dict[str, bool] = field(default_factory=dict)
    duration_s: float = 0.0
    aborted: bool = False

    def to_json(self) -> dict:
        return {
            "task_id": self.task_id,
            "completion_overall": self.completion_overall,
            "completion_left": self.completion_left,
            "completion_right": self.completion_right,
            "success_at": {f"{d:.2f}": v for d, v in self.success_at.items()},
            "collided": self.collided,
            "stage_flags": self.stage_flags,
            "duration_s": self.duration_s,
            "aborted": self.aborted,
        }


@dataclass
class EvaluationReport:
    """Aggregate over a trial set: means, success rates, collision rate."""

    task_id: str
    n_trials: int
    mean_completion_overall: float
    mean_completion_left: float
    mean_completion_right: float
    success_rate: Dict[float, float]
    collision_rate: float
    stage_success_rate: Dict[str, float]
    trials: List[TrialResult]

    def to_json(self) -> dict:
        return {
            "task_id": self.task_id,
            "n_trials": self.n_trials,
            "mean_completion_overall": self.mean_completion_overall,
            "mean_completion_left": self.mean_completion_left,
            "mean_completion_right": self.mean_completion_right,
            "success_rate": {f"{d:.2f}": v for d, v in self.success_rate.items()},
            "collision_rate": self.collision_rate,
            "stage_success_rate": self.stage_success_rate,
            "trials": [t.to_json() for t in self.trials],
        }


def _success_map(completion: float) -> Dict[float, bool]:
    return {delta: completion >= delta for delta in SUCCESS_THRESHOLDS}


def score_gather_balls(
    world_snapshot: dict,
    collision_events: Sequence,
    duration_s: float,
    triangle=None,
    aborted: bool = False,
) -> TrialResult:
    """Score a finished gather-balls trial from the final world snapshot.

    Raises:
        InvalidStateError: if the snapshot is not from a gather-balls world.
    """
    if world_snapshot.get("type") != TASK_GATHER:
        raise InvalidStateError(f"expected gather-balls state, got {world_snapshot.get('type')!r}")
    balls = np.asarray(world_snapshot["balls"], dtype=np.float64)
    cluster_of = np.asarray(world_snapshot["cluster_of"])
    tri = np.asarray(triangle if triangle is not None else world_snapshot["triangle"])
    credits = np.array([point_in_triangle_credit(b, tri, EDGE_TOLERANCE_M) for b in balls])
    left = credits[cluster_of == 0]
    right = credits[cluster_of == 1]
    overall = float(credits.sum() / len(credits))
    result = TrialResult(
        task_id=TASK_GATHER,
        completion_overall=overall,
        completion_left=float(left.sum() / len(left)),
        completion_right=float(right.sum() / len(right)),
        success_at=_success_map(overall),
        collided=len(collision_events) > 0,
        duration_s=duration_s,
        aborted=aborted,
    )
    return result


def score_curtained_shelf(
    world_snapshot: dict,
    collision_events: Sequence,
    duration_s: float,
    aborted: bool = False,
) -> TrialResult:
    """Score a finished shelf trial: per-stage success from the latched flags."""
    if world_snapshot.get("type") != TASK_SHELF:
        raise InvalidStateError(f"expected shelf state, got {world_snapshot.get('type')!r}")
    flags = dict(world_snapshot["stage_flags"])
    overall = 1.0 if flags.get("throw") else 0.0
    return TrialResult(
        task_id=TASK_SHELF,
        completion_overall=overall,
        completion_left=overall,
        completion_right=overall,
        success_at=_success_map(overall),
        collided=len(collision_events) > 0,
        stage_flags=flags,
        duration_s=duration_s,
        aborted=aborted,
    )


def aggregate(trials: Sequence[TrialResult]) -> EvaluationReport:
    """Aggregate trial results into means and rates.

    Raises:
        InvalidInputError: on an empty trial list.
    """
    if not trials:
        raise InvalidInputError("cannot aggregate an empty trial list")
    task_id = trials[0].task_id
    n = len(trials)
    success_rate = {
        delta: sum(1 for t in trials if t.success_at.get(delta, False)) / n
        for delta in SUCCESS_THRESHOLDS
    }
    stage_rate: Dict[str, float] = {}
    if any(t.stage_flags for t in trials):
        for name in STAGE_NAMES:
            stage_rate[name] = sum(1 for t in trials if t.stage_flags.get(name, False)) / n
    return EvaluationReport(
        task_id=task_id,
        n_trials=n,
        mean_completion_overall=float(np.mean([t.completion_overall for t in trials])),
        mean_completion_left=float(np.mean([t.completion_left for t in trials])),
        mean_completion_right=float(np.mean([t.completion_right for t in trials])),
        success_rate=success_rate,
        collision_rate=sum(1 for t in trials if t.collided) / n,
        stage_success_rate=stage_rate,
        trials=list(trials),
    )


def format_report_table(report: EvaluationReport) -> str:
    """Fixed-layout results table (completion / success / collision columns)."""
    lines = []
    if report.task_id == TASK_GATHER:
        lines.append(
            f"{'Trials':>6} | {'Completion Rate c (%)':^28} | {'Success Rate (%)':^26} | Collision"
        )
        lines.append(
            f"{'':>6} | {'Overall':>8} {'Left':>8} {'Right':>8}  | "
            f"{'c>=80':>7} {'c>=60':>7} {'c>=40':>7}   | Rate (%)"
        )
        lines.append("-" * 86)
        lines.append(
            f"{report.n_trials:>6} | "
            f"{100 * report.mean_completion_overall:>8.2f} "
            f"{100 * report.mean_completion_left:>8.2f} "
            f"{100 * report.mean_completion_right:>8.2f}  | "
            f"{100 * report.success_rate[0.8]:>7.0f} "
            f"{100 * report.success_rate[0.6]:>7.0f} "
            f"{100 * report.success_rate[0.4]:>7.0f}   | "
            f"{100 * report.collision_rate:>8.0f}"
        )
    else:
        headers = ["Reach in", "Push aside", "Approach", "Grasp", "Throw"]
        lines.append(f"{'Trials':>6} | " + " ".join(f"{h:>10}" for h in headers))
        lines.append("-" * 66)
        rates = [100 * report.stage_success_rate.get(n, 0.0) for n in STAGE_NAMES]
        lines.append(f"{report.n_trials:>6} | " + " ".join(f"{r:>10.0f}" for r in rates))
    return "\n".join(lines)


def save_report(report: EvaluationReport, path) -> None:
    with open(path, "w") as f:
        json.dump(report.to_json(), f, indent=2, sort_keys=True)
        f.write("\n")
