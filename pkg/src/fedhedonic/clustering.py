"""Exhaustive optimal clustering: extremal total gain over partitions whose
blocks all cover their members' minimal prices."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

from .combinatorics import Partition, iter_partition_masks, members_of
from .gains import GainReport

FEAS_TOL = 1e-9


@dataclass(frozen=True)
class ClusteringSolution:
    partition: Partition
    objective: float
    feasible_count: int
    direction: Literal["min", "max"]

    def to_dict(self) -> dict:
        return {
            "partition": self.partition.to_lists(),
            "objective": self.objective,
            "feasible_count": self.feasible_count,
            "direction": self.direction,
        }


def block_feasible(report: GainReport, mask: int) -> bool:
    prices = sum(report.pi[i] for i in members_of(mask))
    return prices <= report.u[mask] + FEAS_TOL


def optimal_clustering(
    report: GainReport, direction: Literal["min", "max"] = "min"
) -> ClusteringSolution:
    if direction not in ("min", "max"):
        raise ValueError(f"unknown direction {direction!r}")
    n = report.n
    u = report.u.tolist()
    ok = [block_feasible(report, mask) for mask in range(1 << n)]
    sign = 1.0 if direction == "min" else -1.0
    best = None
    best_masks = None
    count = 0
    for masks in iter_partition_masks(n):
        if not all(ok[m] for m in masks):
            continue
        count += 1
        value = sum(u[m] for m in masks)
        if best is None or sign * value < sign * best:
            best, best_masks = value, masks
    # the all-singletons partition is always feasible, so best is set
    return ClusteringSolution(Partition.from_masks(best_masks, n), best, count, direction)
