import numpy as np
import pytest

from fedhedonic.clustering import block_feasible, optimal_clustering
from fedhedonic.combinatorics import Partition, bell_number
from fedhedonic.gains import GainReport, build_report
from fedhedonic.scenario import GenerationKnobs, generate_scenario


def insertion_partitions(items):
    if not items:
        yield []
        return
    for blocks in insertion_partitions(items[:-1]):
        for b in range(len(blocks)):
            yield blocks[:b] + [blocks[b] + [items[-1]]] + blocks[b + 1 :]
        yield blocks + [[items[-1]]]


def brute_objectives(report):
    values = []
    for blocks in insertion_partitions(list(range(report.n))):
        masks = [sum(1 << i for i in b) for b in blocks]
        if all(sum(report.pi[i] for i in b) <= report.u[m] + 1e-9 for b, m in zip(blocks, masks)):
            values.append(sum(report.u[m] for m in masks))
    return values


def test_single_agent():
    rep = GainReport.from_delta(1, [0.0, 0.0], [0.4])
    sol = optimal_clustering(rep)
    assert sol.partition == Partition.singletons(1)
    assert sol.objective == pytest.approx(0.4)


@pytest.mark.parametrize("direction", ["min", "max"])
def test_negative_marginals_leave_only_singletons(direction):
    d = -np.ones(8)
    rep = GainReport.from_delta(3, d, [0.1, 0.2, 0.3])
    sol = optimal_clustering(rep, direction)
    assert sol.partition == Partition.singletons(3)
    assert sol.feasible_count == 1


@pytest.mark.parametrize("seed", range(6))
def test_matches_brute_force(seed):
    rep = build_report(generate_scenario(3 + seed % 3, 2, seed, GenerationKnobs(cost_per_agent=0.0)))
    values = brute_objectives(rep)
    lo, hi = optimal_clustering(rep, "min"), optimal_clustering(rep, "max")
    assert lo.objective == pytest.approx(min(values), rel=1e-12)
    assert hi.objective == pytest.approx(max(values), rel=1e-12)
    assert lo.feasible_count == len(values) <= bell_number(rep.n)
    assert lo.objective <= hi.objective
    if len(set(values)) > 1:
        assert lo.objective < hi.objective


@pytest.mark.parametrize("seed", range(6))
def test_feasibility_is_nonnegative_marginal(seed):
    rng = np.random.default_rng(seed)
    rep = GainReport.from_delta(4, rng.standard_normal(16), rng.uniform(0, 2, 4))
    for mask in range(1, 16):
        if mask & (mask - 1) == 0:
            assert block_feasible(rep, mask)
        else:
            assert block_feasible(rep, mask) == (rep.delta[mask] >= -1e-9)


def test_rejects_unknown_direction():
    with pytest.raises(ValueError):
        optimal_clustering(GainReport.from_delta(1, [0.0, 0.0]), "sideways")
