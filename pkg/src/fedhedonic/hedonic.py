"""Allocation tables, induced preferences and the exhaustive Nash-stability oracle."""

from __future__ import annotations

import enum
from collections.abc import Iterator, Mapping, Sequence
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .combinatorics import Coalition, Partition, iter_partition_masks, pairs_of
from .errors import CapacityError, ContractError

ORACLE_CAP = 10


@dataclass(frozen=True)
class AllocationTable:
    """Clustering gain ``phi[i, S]`` for every agent ``i`` in coalition ``S``.

    ``values`` has shape ``(n, 2**n)``; cells with ``i`` outside ``S`` hold NaN
    and singleton cells hold 0, leaving exactly ``n * 2**(n-1)`` entries.
    """

    n: int
    values: np.ndarray

    def __post_init__(self) -> None:
        if self.values.shape != (self.n, 1 << self.n):
            raise ValueError("allocation table has the wrong shape")
        inside = membership_mask(self.n)
        if np.isnan(self.values[inside]).any():
            raise ValueError("allocation table has missing entries")
        if not np.isnan(self.values[~inside]).all():
            raise ValueError("allocation table has entries for agents outside their coalition")
        for i in range(self.n):
            if self.values[i, 1 << i] != 0:
                raise ValueError("singleton clustering gain must be 0")

    @classmethod
    def from_entries(cls, n: int, entries: Mapping[tuple[int, int], float]) -> AllocationTable:
        """Table from ``(i, mask) -> value``; unlisted entries default to 0."""
        values = np.where(membership_mask(n), 0.0, np.nan)
        for (i, mask), val in entries.items():
            if not mask >> i & 1:
                raise ValueError(f"agent {i} not in coalition mask {mask}")
            values[i, mask] = val
        return cls(n, values)

    @classmethod
    def zeros(cls, n: int) -> AllocationTable:
        return cls.from_entries(n, {})

    @property
    def size(self) -> int:
        return int((~np.isnan(self.values)).sum())

    def __getitem__(self, key: tuple[int, Coalition | int]) -> float:
        i, S = key
        mask = S.mask if isinstance(S, Coalition) else S
        if not mask >> i & 1:
            raise ContractError(f"agent {i} is not in coalition {mask}")
        return float(self.values[i, mask])

    def entries(self) -> Iterator[tuple[int, int, float]]:
        for i in range(self.n):
            for mask in range(1 << self.n):
                if mask >> i & 1:
                    yield i, mask, float(self.values[i, mask])

    def to_dict(self) -> dict[str, float]:
        return {f"{i}:{mask}": v for i, mask, v in self.entries()}

    @classmethod
    def from_dict(cls, n: int, d: Mapping[str, float]) -> AllocationTable:
        entries = {}
        for key, val in d.items():
            i, mask = key.split(":")
            entries[int(i), int(mask)] = float(val)
        return cls.from_entries(n, entries)


def membership_mask(n: int) -> np.ndarray:
    masks = np.arange(1 << n)
    return ((masks[None, :] >> np.arange(n)[:, None]) & 1).astype(bool)


@dataclass(frozen=True)
class MutualGainVector:
    """Symmetric pairwise gains, one value per pair in ``pairs_of(N)`` order."""

    n: int
    values: np.ndarray

    def __post_init__(self) -> None:
        if self.values.shape != (self.n * (self.n - 1) // 2,):
            raise ValueError("mutual gain vector needs n(n-1)/2 entries")

    @cached_property
    def pairs(self) -> list[tuple[int, int]]:
        return pairs_of(range(self.n))

    @cached_property
    def matrix(self) -> np.ndarray:
        V = np.zeros((self.n, self.n))
        for (i, j), val in zip(self.pairs, self.values):
            V[i, j] = V[j, i] = val
        return V

    def __getitem__(self, pair: tuple[int, int]) -> float:
        i, j = pair
        if i == j:
            return 0.0
        return float(self.matrix[i, j])

    @classmethod
    def from_pairs(cls, n: int, gains: Mapping[tuple[int, int], float]) -> MutualGainVector:
        """Vector from ``(i, j) -> v``; unlisted pairs are 0, either orientation accepted."""
        index = {p: k for k, p in enumerate(pairs_of(range(n)))}
        values = np.zeros(len(index))
        for (i, j), val in gains.items():
            values[index[min(i, j), max(i, j)]] = val
        return cls(n, values)

    def to_dict(self) -> dict[str, float]:
        return {f"{i},{j}": float(v) for (i, j), v in zip(self.pairs, self.values)}

    @classmethod
    def from_dict(cls, n: int, d: Mapping[str, float]) -> MutualGainVector:
        gains = {}
        for key, val in d.items():
            i, j = key.split(",")
            gains[int(i), int(j)] = float(val)
        return cls.from_pairs(n, gains)


def phi_from_v(v: MutualGainVector) -> AllocationTable:
    """``phi[i, S] = sum_{j in S} v(i, j)`` for every agent-in-coalition cell.

    Sums accumulate in ascending ``j`` so values agree bit-for-bit with the
    per-label gains used by the dynamics.
    """
    n = v.n
    V = v.matrix
    values = np.zeros((n, 1 << n))
    for mask in range(1, 1 << n):
        top = mask.bit_length() - 1
        values[:, mask] = values[:, mask ^ (1 << top)] + V[:, top]
    values[~membership_mask(n)] = np.nan
    return AllocationTable(v.n, values)


class Preference(enum.Enum):
    FIRST = "first"
    SECOND = "second"
    INDIFFERENT = "indifferent"


def prefers(i: int, S: Coalition, T: Coalition, phi: AllocationTable) -> Preference:
    """Compare agent ``i``'s clustering gain in ``S`` against ``T``."""
    if i not in S or i not in T:
        raise ContractError(f"agent {i} must belong to both coalitions")
    a, b = phi[i, S], phi[i, T]
    if a > b:
        return Preference.FIRST
    if b > a:
        return Preference.SECOND
    return Preference.INDIFFERENT


@dataclass(frozen=True)
class StabilityCertificate:
    partition: Partition
    stable: bool
    witness: tuple[int, Coalition] | None = None

    def __post_init__(self) -> None:
        if not self.stable and self.witness is None:
            raise ValueError("an unstable verdict needs a witness")

    @property
    def verdict(self) -> str:
        return "stable" if self.stable else "unstable"


def has_deviation(rows: Sequence[Sequence[float]], masks: Sequence[int]) -> bool:
    """Fast block-major scan for any strictly profitable unilateral move."""
    for own in masks:
        for i in _bits(own):
            row = rows[i]
            current = row[own]
            if current < 0.0:
                return True
            bit = 1 << i
            for T in masks:
                if T != own and row[T | bit] > current:
                    return True
    return False


def _scan_order(masks: Sequence[int]) -> list[tuple[int, int]]:
    return sorted((i, own) for own in masks for i in _bits(own))


def _bits(mask: int) -> Iterator[int]:
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def check_nash_stable(partition: Partition, phi: AllocationTable) -> StabilityCertificate:
    """Nash-stability verdict with the first profitable unilateral move as witness."""
    if partition.n != phi.n:
        raise ContractError("partition and allocation table disagree on n")
    rows = phi.values.tolist()
    masks = partition.masks
    for i, own in _scan_order(masks):
        row = rows[i]
        current = row[own]
        for T in masks:
            if T != own and row[T | 1 << i] > current:
                return StabilityCertificate(partition, False, (i, Coalition(T, phi.n)))
        if 0.0 > current:
            return StabilityCertificate(partition, False, (i, Coalition(0, phi.n)))
    return StabilityCertificate(partition, True)


def mapping_M(phi: AllocationTable) -> list[Partition]:
    """Every Nash-stable partition under ``phi``, in enumeration order."""
    if phi.n > ORACLE_CAP:
        raise CapacityError(f"stability oracle requires n <= {ORACLE_CAP}")
    rows = phi.values.tolist()
    return [
        Partition.from_masks(masks, phi.n)
        for masks in iter_partition_masks(phi.n)
        if not has_deviation(rows, masks)
    ]
