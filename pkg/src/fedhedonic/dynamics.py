"""Best-reply dynamics on the strategy-label game induced by mutual gains.

Each agent picks one of ``n`` labels; agents sharing a label form a
coalition. With symmetric pairwise gains the game has the potential
``P(sigma) = sum over co-labelled pairs of v(i, j)``, so every strict
improvement path is finite and ends in a Nash-stable partition.
"""

from __future__ import annotations

import json
from collections.abc import Sequence
from dataclasses import asdict, dataclass
from typing import Literal

import numpy as np

from .combinatorics import Partition, iter_partition_masks
from .errors import ContractError
from .hedonic import MutualGainVector

StrategyTuple = tuple[int, ...]
Schedule = Literal["round_robin", "random"]


def check_tuple(sigma: Sequence[int], n: int) -> StrategyTuple:
    if len(sigma) != n:
        raise ContractError(f"strategy tuple must have {n} labels")
    if any(not 0 <= s < n for s in sigma):
        raise ContractError(f"labels must lie in 0..{n - 1}")
    return tuple(int(s) for s in sigma)


def partition_of(sigma: Sequence[int]) -> Partition:
    n = len(sigma)
    groups: dict[int, int] = {}
    for i, label in enumerate(check_tuple(sigma, n)):
        groups[label] = groups.get(label, 0) | 1 << i
    return Partition.from_masks(groups.values(), n)


def player_gain(i: int, sigma: Sequence[int], v: MutualGainVector) -> float:
    return label_gains(i, sigma, v)[sigma[i]]


def potential(sigma: Sequence[int], v: MutualGainVector) -> float:
    V = v.matrix.tolist()
    n = len(sigma)
    return sum((V[i][j] for i in range(n) for j in range(i + 1, n) if sigma[i] == sigma[j]), 0.0)


def label_gains(i: int, sigma: Sequence[int], v: MutualGainVector) -> list[float]:
    """Gain agent ``i`` would get under each label, others fixed."""
    n = len(sigma)
    out = [0.0] * n
    row = v.matrix[i].tolist()
    for j in range(n):
        if j != i:
            out[sigma[j]] += row[j]
    return out


def best_reply(i: int, sigma: Sequence[int], v: MutualGainVector) -> int | None:
    """Smallest label with the best strictly improving gain, or None."""
    gains = label_gains(i, sigma, v)
    best = max(gains)
    if not best > gains[sigma[i]]:
        return None
    return gains.index(best)


@dataclass(frozen=True)
class Step:
    deviator: int
    old_label: int
    new_label: int
    gain_before: float
    gain_after: float
    potential_before: float
    potential_after: float


@dataclass(frozen=True)
class DynamicsTrace:
    steps: tuple[Step, ...]
    terminal: StrategyTuple
    converged: bool
    rounds: int
    schedule: str
    seed: int | None
    initial_potential: float

    @property
    def final_potential(self) -> float:
        return self.steps[-1].potential_after if self.steps else self.initial_potential

    def to_jsonl(self, extra: dict | None = None) -> str:
        """One JSON line per step, then a footer record."""
        lines = [json.dumps({"step": k, **asdict(s)}) for k, s in enumerate(self.steps)]
        footer = {
            "terminal": list(self.terminal),
            "converged": self.converged,
            "rounds": self.rounds,
            "final_potential": self.final_potential,
            "schedule": self.schedule,
            "seed": self.seed,
            **(extra or {}),
        }
        lines.append(json.dumps(footer))
        return "\n".join(lines) + "\n"


def run_dynamics(
    sigma0: Sequence[int],
    v: MutualGainVector,
    schedule: Schedule = "round_robin",
    max_steps: int = 10_000,
    seed: int | None = None,
) -> DynamicsTrace:
    """Apply best replies one deviator at a time until a full pass is quiet.

    ``round_robin`` visits agents 0..n-1 each round; ``random`` draws a fresh
    permutation per round from a PCG64 stream seeded with ``seed``.
    """
    if max_steps < 1:
        raise ValueError("max_steps must be at least 1")
    if schedule not in ("round_robin", "random"):
        raise ValueError(f"unknown schedule {schedule!r}")
    n = v.n
    sigma = list(check_tuple(sigma0, n))
    rng = np.random.Generator(np.random.PCG64(seed if seed is not None else 0))
    steps: list[Step] = []
    start = potential(sigma, v)
    rounds = 0
    while True:
        rounds += 1
        order = range(n) if schedule == "round_robin" else rng.permutation(n).tolist()
        moved = False
        for i in order:
            label = best_reply(i, sigma, v)
            if label is None:
                continue
            before_gain = player_gain(i, sigma, v)
            before_pot = potential(sigma, v)
            old = sigma[i]
            sigma[i] = label
            steps.append(
                Step(i, old, label, before_gain, player_gain(i, sigma, v), before_pot, potential(sigma, v))
            )
            moved = True
            if len(steps) >= max_steps:
                quiet = all(best_reply(j, sigma, v) is None for j in range(n))
                return DynamicsTrace(tuple(steps), tuple(sigma), quiet, rounds, schedule, seed, start)
        if not moved:
            return DynamicsTrace(tuple(steps), tuple(sigma), True, rounds, schedule, seed, start)


def pair_sums(v: MutualGainVector) -> list[float]:
    """``W[mask]`` = sum of ``v`` over pairs inside ``mask``."""
    n = v.n
    V = v.matrix.tolist()
    W = [0.0] * (1 << n)
    for mask in range(1, 1 << n):
        low = mask & -mask
        i = low.bit_length() - 1
        rest = mask ^ low
        W[mask] = W[rest] + sum(V[i][j] for j in range(i + 1, n) if rest >> j & 1)
    return W


def argmax_potential(v: MutualGainVector) -> Partition:
    """Partition maximizing the potential; first in enumeration order on ties."""
    W = pair_sums(v)
    best_masks = None
    best = -np.inf
    for masks in iter_partition_masks(v.n):
        value = sum(W[m] for m in masks)
        if value > best:
            best, best_masks = value, masks
    return Partition.from_masks(best_masks, v.n)
