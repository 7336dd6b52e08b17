"""Enumeration primitives over agent subsets, set partitions and reception vectors.

Coalitions are bitmasks over agents ``0..n-1``. Partitions are produced in
restricted-growth-string (RGS) lexicographic order, so the grand coalition
comes first and the all-singletons partition comes last.
"""

from __future__ import annotations

from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass

from .errors import CapacityError

SUBSET_CAP = 20
PARTITION_CAP = 13
RECEPTION_CAP = 20

ReceptionVector = tuple[int, ...]


@dataclass(frozen=True, slots=True)
class Coalition:
    """A subset of ``{0, ..., n-1}`` stored as a bitmask."""

    mask: int
    n: int

    def __post_init__(self) -> None:
        if self.n < 0 or self.mask < 0 or self.mask >> self.n:
            raise ValueError(f"mask {self.mask} is not a subset of 0..{self.n - 1}")

    @classmethod
    def of(cls, members: Iterable[int], n: int) -> Coalition:
        mask = 0
        for i in members:
            if not 0 <= i < n:
                raise ValueError(f"agent {i} outside 0..{n - 1}")
            mask |= 1 << i
        return cls(mask, n)

    @classmethod
    def grand(cls, n: int) -> Coalition:
        return cls((1 << n) - 1, n)

    @property
    def members(self) -> tuple[int, ...]:
        return members_of(self.mask)

    def __iter__(self) -> Iterator[int]:
        return iter(self.members)

    def __len__(self) -> int:
        return self.mask.bit_count()

    def __contains__(self, i: object) -> bool:
        return isinstance(i, int) and i >= 0 and bool(self.mask >> i & 1)

    def __or__(self, other: Coalition) -> Coalition:
        return Coalition(self.mask | other.mask, max(self.n, other.n))

    def with_agent(self, i: int) -> Coalition:
        return Coalition(self.mask | 1 << i, self.n)

    def __repr__(self) -> str:
        return "{" + ",".join(map(str, self.members)) + "}"


def members_of(mask: int) -> tuple[int, ...]:
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return tuple(out)


@dataclass(frozen=True, slots=True)
class Partition:
    """Disjoint cover of the agent set, blocks sorted by smallest member."""

    blocks: tuple[Coalition, ...]
    n: int

    def __post_init__(self) -> None:
        seen = 0
        last_min = -1
        for b in self.blocks:
            if b.mask == 0:
                raise ValueError("empty block in partition")
            if seen & b.mask:
                raise ValueError("blocks overlap")
            low = (b.mask & -b.mask).bit_length() - 1
            if low <= last_min:
                raise ValueError("blocks are not in canonical order")
            last_min = low
            seen |= b.mask
        if seen != (1 << self.n) - 1:
            raise ValueError("blocks do not cover all agents")

    @classmethod
    def from_masks(cls, masks: Iterable[int], n: int) -> Partition:
        ordered = sorted(masks, key=lambda m: m & -m)
        return cls(tuple(Coalition(m, n) for m in ordered), n)

    @classmethod
    def from_members(cls, blocks: Iterable[Iterable[int]], n: int) -> Partition:
        return cls.from_masks((Coalition.of(b, n).mask for b in blocks), n)

    @classmethod
    def singletons(cls, n: int) -> Partition:
        return cls.from_masks((1 << i for i in range(n)), n)

    @classmethod
    def grand(cls, n: int) -> Partition:
        return cls.from_masks([(1 << n) - 1], n)

    @property
    def masks(self) -> tuple[int, ...]:
        return tuple(b.mask for b in self.blocks)

    def block_of(self, i: int) -> Coalition:
        for b in self.blocks:
            if b.mask >> i & 1:
                return b
        raise ValueError(f"agent {i} not covered")

    def to_lists(self) -> list[list[int]]:
        return [list(b.members) for b in self.blocks]

    def __len__(self) -> int:
        return len(self.blocks)

    def __iter__(self) -> Iterator[Coalition]:
        return iter(self.blocks)

    def __repr__(self) -> str:
        return "|".join(repr(b) for b in self.blocks)


def _check_n(n: int, cap: int, what: str) -> None:
    if not 1 <= n <= cap:
        raise CapacityError(f"{what} requires 1 <= n <= {cap}, got n={n}")


def enumerate_subsets(n: int, min_size: int = 1) -> Iterator[Coalition]:
    """Yield every subset with at least ``min_size`` members, by ascending mask."""
    _check_n(n, SUBSET_CAP, "subset enumeration")
    for mask in range(1 << n):
        if mask.bit_count() >= min_size:
            yield Coalition(mask, n)


def iter_partition_masks(n: int) -> Iterator[tuple[int, ...]]:
    """Yield partitions as tuples of block masks in RGS lexicographic order.

    This is the allocation-free fast path used by the exhaustive oracles.
    """
    _check_n(n, PARTITION_CAP, "partition enumeration")
    blocks = [1]

    def rec(k: int) -> Iterator[tuple[int, ...]]:
        if k == n:
            yield tuple(blocks)
            return
        bit = 1 << k
        for j in range(len(blocks)):
            blocks[j] |= bit
            yield from rec(k + 1)
            blocks[j] ^= bit
        blocks.append(bit)
        yield from rec(k + 1)
        blocks.pop()

    yield from rec(1)


def enumerate_partitions(n: int) -> Iterator[Partition]:
    """Yield every set partition of ``{0..n-1}`` exactly once (Bell(n) items)."""
    for masks in iter_partition_masks(n):
        yield Partition(tuple(Coalition(m, n) for m in masks), n)


def enumerate_receptions(
    S: Coalition, p: Sequence[float] | None = None
) -> Iterator[tuple[ReceptionVector, float]]:
    """Yield all ``2^|S|`` reception vectors over ``S`` with their weights.

    Bits for agents outside ``S`` are fixed to 0. The weight is the
    probability of the vector restricted to ``S`` when ``p`` is given and
    1.0 otherwise. Bit ``b`` of the counter drives the ``b``-th member.
    """
    members = S.members
    if len(members) > RECEPTION_CAP:
        raise CapacityError(f"reception enumeration requires |S| <= {RECEPTION_CAP}")
    k = len(members)
    for code in range(1 << k):
        x = [0] * S.n
        w = 1.0
        for b, i in enumerate(members):
            bit = code >> b & 1
            x[i] = bit
            if p is not None:
                w *= p[i] if bit else 1.0 - p[i]
        yield tuple(x), w


def pairs_of(S: Coalition | Iterable[int]) -> list[tuple[int, int]]:
    """Ordered pairs ``(i, j)`` with ``j > i`` inside ``S``."""
    members = sorted(S.members if isinstance(S, Coalition) else set(S))
    return [(a, b) for idx, a in enumerate(members) for b in members[idx + 1 :]]


def bell_number(n: int) -> int:
    """Bell number via the Bell triangle."""
    row = [1]
    for _ in range(n):
        nxt = [row[-1]]
        for v in row:
            nxt.append(nxt[-1] + v)
        row = nxt
    return row[0]
