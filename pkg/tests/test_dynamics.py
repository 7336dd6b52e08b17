import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fedhedonic.combinatorics import Partition, enumerate_partitions
from fedhedonic.dynamics import (
    argmax_potential,
    best_reply,
    partition_of,
    player_gain,
    potential,
    run_dynamics,
)
from fedhedonic.hedonic import MutualGainVector, check_nash_stable, mapping_M, phi_from_v

from helpers import random_v, v_of


def direct_potential(sigma, v):
    n = len(sigma)
    return sum(v.matrix[i, j] for i in range(n) for j in range(i + 1, n) if sigma[i] == sigma[j])


def labels(p):
    return tuple(next(k for k, b in enumerate(p.to_lists()) if i in b) for i in range(p.n))


def test_partition_of():
    assert partition_of((3, 1, 0, 2)) == Partition.singletons(4)
    assert partition_of((2, 2, 2)) == Partition.grand(3)
    assert partition_of((0, 0, 2, 2)).to_lists() == [[0, 1], [2, 3]]
    with pytest.raises(ValueError):
        partition_of((0, 5))


def test_player_gain_cases():
    v = v_of(3, {(0, 1): 1.0, (0, 2): -1.0, (1, 2): 4.0})
    assert player_gain(0, (0, 1, 2), v) == 0.0
    assert player_gain(0, (0, 0, 2), v) == 1.0
    assert player_gain(0, (0, 0, 0), v) == 0.0


def test_potential_cases():
    v = v_of(3, {(0, 1): 2.0, (0, 2): -1.0, (1, 2): 0.5})
    assert potential((0, 1, 2), v) == 0.0
    assert potential((1, 1, 1), v) == pytest.approx(1.5)
    assert potential((0, 0, 1), v) == 2.0


def test_best_reply_cases():
    zero = MutualGainVector(3, np.zeros(3))
    assert all(best_reply(i, (0, 1, 2), zero) is None for i in range(3))
    pos = v_of(2, {(0, 1): 1.0})
    assert best_reply(0, (0, 1), pos) == 1
    neg = v_of(2, {(0, 1): -1.0})
    assert best_reply(0, (0, 0), neg) == 1


@given(st.integers(0, 2**32), st.integers(2, 8))
@settings(max_examples=60, deadline=None)
def test_potential_identity(seed, n):
    rng = np.random.default_rng(seed)
    v = random_v(rng, n)
    sigma = tuple(rng.integers(0, n, size=n).tolist())
    i = int(rng.integers(n))
    new = list(sigma)
    new[i] = int(rng.integers(n))
    lhs = potential(new, v) - potential(sigma, v)
    rhs = player_gain(i, new, v) - player_gain(i, sigma, v)
    assert lhs == pytest.approx(rhs, abs=1e-10)
    assert potential(sigma, v) == pytest.approx(direct_potential(sigma, v), abs=1e-12)


def test_zero_gains_quiet():
    trace = run_dynamics((0, 0, 1, 3), MutualGainVector(4, np.zeros(6)))
    assert trace.converged and not trace.steps and trace.rounds == 1


@pytest.mark.parametrize("n", range(2, 8))
def test_converges_within_quadratic_budget(n):
    rng = np.random.default_rng(n)
    for _ in range(10):
        v = random_v(rng, n)
        trace = run_dynamics(tuple(range(n)), v, max_steps=10 * n * n)
        assert trace.converged


@pytest.mark.parametrize("seed", range(100))
def test_terminal_in_oracle(seed):
    rng = np.random.default_rng(seed)
    n = 2 + seed % 6
    v = random_v(rng, n)
    sigma0 = tuple(rng.integers(0, n, size=n).tolist())
    trace = run_dynamics(sigma0, v, "random", seed=seed)
    terminal = partition_of(trace.terminal)
    assert check_nash_stable(terminal, phi_from_v(v)).stable
    assert terminal in mapping_M(phi_from_v(v))
    pots = [trace.initial_potential] + [s.potential_after for s in trace.steps]
    assert all(b > a for a, b in zip(pots, pots[1:]))


def test_schedules_are_reproducible():
    v = random_v(np.random.default_rng(9), 6)
    a = run_dynamics((0,) * 6, v, "random", seed=4).to_jsonl()
    assert a == run_dynamics((0,) * 6, v, "random", seed=4).to_jsonl()
    footer = json.loads(a.splitlines()[-1])
    assert footer["converged"] and footer["schedule"] == "random"


def test_step_budget_reports_unconverged():
    v = v_of(3, {(0, 1): 1.0, (0, 2): 1.0, (1, 2): 1.0})
    trace = run_dynamics((0, 1, 2), v, max_steps=1)
    assert len(trace.steps) == 1 and not trace.converged


def test_argmax_potential_cases():
    assert argmax_potential(MutualGainVector(4, np.ones(6))) == Partition.grand(4)
    assert argmax_potential(MutualGainVector(4, -np.ones(6))) == Partition.singletons(4)
    v = v_of(3, {(0, 1): 1.0, (0, 2): -3.0, (1, 2): 1.0})
    best = argmax_potential(v)
    assert best in (Partition.from_members([[0, 1], [2]], 3), Partition.from_members([[1, 2], [0]], 3))


@pytest.mark.parametrize("seed", range(10))
def test_argmax_potential_brute_force(seed):
    rng = np.random.default_rng(seed)
    n = 2 + seed % 5
    v = random_v(rng, n)
    best = argmax_potential(v)
    top = max(direct_potential(labels(p), v) for p in enumerate_partitions(n))
    assert direct_potential(labels(best), v) == pytest.approx(top, abs=1e-12)
    assert best in mapping_M(phi_from_v(v))
