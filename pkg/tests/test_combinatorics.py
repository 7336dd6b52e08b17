import itertools

import pytest
from hypothesis import given, strategies as st

from fedhedonic.combinatorics import (
    Coalition,
    Partition,
    bell_number,
    enumerate_partitions,
    enumerate_receptions,
    enumerate_subsets,
    iter_partition_masks,
    pairs_of,
)
from fedhedonic.errors import CapacityError


def stirling2_bell(n):
    # independent count: sum_k S(n, k) with S(n, k) = k S(n-1, k) + S(n-1, k-1)
    row = [1]
    for m in range(1, n + 1):
        new = [0] * (m + 1)
        for k in range(1, m + 1):
            new[k] = k * (row[k] if k < len(row) else 0) + row[k - 1]
        row = new
    return sum(row)


def insertion_partitions(items):
    # every set partition by inserting the last item into an existing block or a new one
    if not items:
        yield []
        return
    head, last = items[:-1], items[-1]
    for blocks in insertion_partitions(head):
        for b in range(len(blocks)):
            yield blocks[:b] + [blocks[b] + [last]] + blocks[b + 1 :]
        yield blocks + [[last]]


def canon(blocks):
    return tuple(sorted(tuple(sorted(b)) for b in blocks))


def test_subsets_small_cases():
    assert [c.members for c in enumerate_subsets(2)] == [(0,), (1,), (0, 1)]
    got = [c.members for c in enumerate_subsets(3, min_size=2)]
    assert sorted(got) == [(0, 1), (0, 1, 2), (0, 2), (1, 2)]
    everything = list(enumerate_subsets(10, min_size=0))
    assert len(everything) == 1024
    assert Coalition(0, 10) in everything


def test_partition_small_cases():
    assert [p.to_lists() for p in enumerate_partitions(1)] == [[[0]]]
    three = {canon(p.to_lists()) for p in enumerate_partitions(3)}
    assert three == {
        ((0, 1, 2),),
        ((0, 1), (2,)),
        ((0, 2), (1,)),
        ((0,), (1, 2)),
        ((0,), (1,), (2,)),
    }


@pytest.mark.parametrize("n", range(1, 8))
def test_partitions_match_insertion_oracle(n):
    ours = [canon(p.to_lists()) for p in enumerate_partitions(n)]
    assert len(ours) == len(set(ours))
    assert set(ours) == {canon(b) for b in insertion_partitions(list(range(n)))}


@pytest.mark.parametrize("n", range(0, 14))
def test_bell_numbers_agree(n):
    assert bell_number(n) == stirling2_bell(n)


def test_bell_ten():
    assert bell_number(10) == 115975
    assert sum(1 for _ in iter_partition_masks(10)) == 115975


def test_partition_order_grand_first_singletons_last():
    masks = list(iter_partition_masks(4))
    assert masks[0] == (0b1111,)
    assert masks[-1] == (1, 2, 4, 8)


def test_partition_validation():
    with pytest.raises(ValueError):
        Partition.from_masks([0b011, 0b110], 3)
    with pytest.raises(ValueError):
        Partition.from_masks([0b011], 3)
    p = Partition.from_members([[2], [1, 0]], 3)
    assert p.to_lists() == [[0, 1], [2]]
    assert p.block_of(1).members == (0, 1)


def test_partition_cap():
    with pytest.raises(CapacityError):
        next(enumerate_partitions(14))


def test_receptions():
    assert [x for x, _ in enumerate_receptions(Coalition.of([0], 1))] == [(0,), (1,)]
    assert len(list(enumerate_receptions(Coalition.of([0, 1], 2)))) == 4
    five = [x for x, _ in enumerate_receptions(Coalition.of(range(5), 7))]
    assert len(five) == 32 and len(set(five)) == 32
    assert all(x[5] == 0 and x[6] == 0 for x in five)


@given(st.lists(st.floats(0, 1), min_size=1, max_size=6))
def test_reception_weights_sum_to_one(p):
    S = Coalition.grand(len(p))
    total = sum(w for _, w in enumerate_receptions(S, p))
    assert total == pytest.approx(1.0, abs=1e-12)


def test_pairs():
    assert pairs_of(Coalition.of([0, 1, 2], 3)) == [(0, 1), (0, 2), (1, 2)]
    assert pairs_of(Coalition.of([4], 5)) == []
    assert len(pairs_of(range(6))) == 15
    assert pairs_of(range(5)) == list(itertools.combinations(range(5), 2))


@given(st.integers(1, 8), st.data())
def test_coalition_roundtrip(n, data):
    members = data.draw(st.sets(st.integers(0, n - 1)))
    c = Coalition.of(members, n)
    assert set(c) == members
    assert list(c) == sorted(members)
    assert len(c) == len(members)
