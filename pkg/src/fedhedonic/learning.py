"""Parameter aggregation and exact expected-loss evaluation.

All expectations are taken by exhaustive enumeration over reception vectors,
never by sampling. A reception vector with no received agent has no weighted
average; aggregation then falls back to the MAE's own parameters and the
expected loss charges the scenario's ``fallback_loss`` for that outcome.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .combinatorics import RECEPTION_CAP, Coalition
from .errors import CapacityError, ContractError
from .scenario import Scenario

log = logging.getLogger(__name__)


def _reception_matrix(k: int) -> np.ndarray:
    """All ``2^k`` bit rows; bit ``b`` of row ``r`` drives column ``b``."""
    codes = np.arange(1 << k, dtype=np.int64)[:, None]
    return ((codes >> np.arange(k, dtype=np.int64)) & 1).astype(float)


def reception_probabilities(X: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Row-wise ``prod_i p_i^x_i (1-p_i)^(1-x_i)``."""
    return np.prod(np.where(X > 0, p, 1.0 - p), axis=1)


def _check_coalition(S: Coalition, scenario: Scenario) -> np.ndarray:
    if S.n != scenario.n:
        raise ContractError("coalition population does not match scenario")
    if S.mask == 0:
        raise ContractError("coalition must be non-empty")
    if len(S) > RECEPTION_CAP:
        raise CapacityError(f"reception enumeration requires |S| <= {RECEPTION_CAP}")
    return np.array(S.members, dtype=np.int64)


def aggregate(S: Coalition, x: Sequence[int], scenario: Scenario) -> np.ndarray:
    """Data-size weighted average of the received models in ``S``."""
    idx = _check_coalition(S, scenario)
    w = np.asarray(x, dtype=float)[idx] * scenario.sizes[idx]
    total = w.sum()
    if total == 0:
        return scenario.mae_theta.copy()
    return w @ scenario.thetas[idx] / total


def _aggregates(idx: np.ndarray, scenario: Scenario) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Aggregates, probabilities and an all-zero flag for every reception over ``idx``."""
    X = _reception_matrix(len(idx))
    W = X * scenario.sizes[idx]
    denom = W.sum(axis=1)
    empty = denom == 0
    denom[empty] = 1.0
    agg = (W @ scenario.thetas[idx]) / denom[:, None]
    agg[empty] = scenario.mae_theta
    return agg, reception_probabilities(X, scenario.reliabilities[idx]), empty


def expected_loss(S: Coalition, scenario: Scenario) -> float:
    """Expected loss of the aggregate of ``S`` over all ``2^|S|`` receptions."""
    idx = _check_coalition(S, scenario)
    agg, prob, empty = _aggregates(idx, scenario)
    losses = scenario.evaluator.batch(agg)
    losses[empty] = scenario.fallback_loss
    return float(losses @ prob)


def mae_aggregate(x: Sequence[int], scenario: Scenario) -> np.ndarray:
    """Blend of the MAE's model with the aggregate of all agents."""
    w = scenario.mae_weight
    grand = aggregate(Coalition.grand(scenario.n), x, scenario)
    return w * scenario.mae_theta + (1.0 - w) * grand


def expected_mae_params(scenario: Scenario) -> np.ndarray:
    idx = _check_coalition(Coalition.grand(scenario.n), scenario)
    agg, prob, _ = _aggregates(idx, scenario)
    w = scenario.mae_weight
    return w * scenario.mae_theta + (1.0 - w) * (prob @ agg)


def expected_mae_loss(scenario: Scenario) -> float:
    """Expected loss of the blended model; the no-reception case evaluates the MAE model."""
    idx = _check_coalition(Coalition.grand(scenario.n), scenario)
    agg, prob, _ = _aggregates(idx, scenario)
    w = scenario.mae_weight
    blended = w * scenario.mae_theta + (1.0 - w) * agg
    return float(scenario.evaluator.batch(blended) @ prob)


@dataclass(frozen=True)
class MergeCheck:
    x: tuple[int, ...]
    avg_margin: float | None
    merge_margin: float | None


@dataclass(frozen=True)
class MergeDiagnostics:
    """Per-reception margins of the two merge assumptions.

    ``avg_margin`` is (average received local loss) - (loss of the aggregate
    of S); ``merge_margin`` is (received-count weighted loss of S and T) -
    (loss of the aggregate of S and T). Nonnegative margins mean the
    assumption holds. ``None`` marks receptions where a side is undefined.
    """

    checks: tuple[MergeCheck, ...]

    @staticmethod
    def _fraction(values: list[float]) -> float:
        return sum(v >= -1e-12 for v in values) / len(values) if values else 1.0

    @property
    def avg_fraction(self) -> float:
        return self._fraction([c.avg_margin for c in self.checks if c.avg_margin is not None])

    @property
    def merge_fraction(self) -> float:
        return self._fraction([c.merge_margin for c in self.checks if c.merge_margin is not None])


def loss_merge_diagnostics(S: Coalition, T: Coalition, scenario: Scenario) -> MergeDiagnostics:
    """Report, never enforce, whether merging models lowers loss for each reception."""
    _check_coalition(S, scenario)
    _check_coalition(T, scenario)
    if S.mask & T.mask:
        raise ContractError("S and T must be disjoint")
    U = S | T
    L = scenario.evaluator
    local = [a.local_loss for a in scenario.agents]
    members = U.members
    checks = []
    for code in range(1 << len(members)):
        x = [0] * scenario.n
        for b, i in enumerate(members):
            x[i] = code >> b & 1
        rs = sum(x[i] for i in S.members)
        rt = sum(x[i] for i in T.members)
        avg_margin = None
        if rs:
            mean_local = sum(x[i] * local[i] for i in S.members) / rs
            avg_margin = mean_local - L(aggregate(S, x, scenario))
        merge_margin = None
        if rs and rt:
            blended = (rs * L(aggregate(S, x, scenario)) + rt * L(aggregate(T, x, scenario))) / (rs + rt)
            merge_margin = blended - L(aggregate(U, x, scenario))
        checks.append(MergeCheck(tuple(x), avg_margin, merge_margin))
    diag = MergeDiagnostics(tuple(checks))
    log.debug(
        "merge diagnostics S=%r T=%r: averaging holds %.3f, merging holds %.3f",
        S, T, diag.avg_fraction, diag.merge_fraction,
    )
    return diag
