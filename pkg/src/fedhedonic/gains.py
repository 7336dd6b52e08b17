"""Coalition gains, minimal prices and marginal gains.

A coalition of two or more agents earns ``f(1/E[L]) - c0*|S|``. A singleton
earns exactly its minimal price ``f(p_i / L_i)``, so its marginal gain is 0.
"""

from __future__ import annotations

import json
import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np

from .combinatorics import SUBSET_CAP, Coalition, members_of
from .errors import CapacityError, DomainError
from .learning import expected_loss
from .scenario import GainFnSpec, Scenario

log = logging.getLogger(__name__)

INVERSE_LOSS_CAP = 1e12
SUPERADDITIVE_TOL = 1e-9
SUPERADDITIVE_CAP = 12

__all__ = [
    "GainFnSpec",
    "GainReport",
    "build_report",
    "cluster_gain",
    "gain_fn_eval",
    "is_superadditive",
    "marginal_gain",
    "minimal_price",
]


def gain_fn_eval(spec: GainFnSpec, z: float) -> float:
    if not z > 0:
        raise DomainError(f"gain function needs z > 0, got {z}")
    if spec.kind == "linear":
        return spec.alpha * z
    return spec.alpha * math.log1p(z)


def _capped_ratio(num: float, den: float, what: str) -> float:
    if den <= 0 or num / den > INVERSE_LOSS_CAP:
        log.warning("%s: loss %.3g too small, capping ratio at %.0e", what, den, INVERSE_LOSS_CAP)
        return INVERSE_LOSS_CAP
    return num / den


def minimal_price(i: int, scenario: Scenario) -> float:
    """Least payment agent ``i`` accepts, ``f(p_i / L(theta_i))``."""
    agent = scenario.agents[i]
    if agent.p == 0:
        # right limit f(0+) = 0 for both built-in kinds
        return 0.0
    z = _capped_ratio(agent.p, agent.local_loss, f"agent {i}")
    return gain_fn_eval(scenario.gain_fn, z)


def _coalition_value(S: Coalition, scenario: Scenario, loss: float | None = None) -> float:
    if loss is None:
        loss = expected_loss(S, scenario)
    z = _capped_ratio(1.0, loss, f"coalition {S!r}")
    return gain_fn_eval(scenario.gain_fn, z) - scenario.cost_per_agent * len(S)


def cluster_gain(S: Coalition, scenario: Scenario) -> float:
    if S.mask == 0:
        return 0.0
    if len(S) == 1:
        return minimal_price(S.members[0], scenario)
    return _coalition_value(S, scenario)


def marginal_gain(S: Coalition, scenario: Scenario) -> float:
    if len(S) <= 1:
        return 0.0
    prices = sum(minimal_price(i, scenario) for i in S.members)
    return _coalition_value(S, scenario) - prices


@dataclass(frozen=True)
class GainReport:
    """Gain ``u``, marginal gain ``delta`` (indexed by coalition mask) and prices ``pi``."""

    n: int
    u: np.ndarray
    delta: np.ndarray
    pi: np.ndarray

    def __post_init__(self) -> None:
        size = 1 << self.n
        if self.u.shape != (size,) or self.delta.shape != (size,) or self.pi.shape != (self.n,):
            raise ValueError("report arrays do not match population size")
        if self.u[0] != 0 or self.delta[0] != 0:
            raise ValueError("empty coalition must have zero gain")
        for i in range(self.n):
            if self.delta[1 << i] != 0:
                raise ValueError("singleton marginal gain must be zero")

    @classmethod
    def from_delta(cls, n: int, delta: Sequence[float], pi: Sequence[float] | None = None) -> GainReport:
        """Report with given marginal gains; ``u`` is reconstructed as ``delta + sum(pi)``."""
        d = np.array(delta, dtype=float)
        prices = np.zeros(n) if pi is None else np.array(pi, dtype=float)
        for i in range(n):
            d[1 << i] = 0.0
        d[0] = 0.0
        u = d.copy()
        for mask in range(1, 1 << n):
            u[mask] += sum(prices[i] for i in members_of(mask))
        return cls(n, u, d, prices)

    def to_dict(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "pi": self.pi.tolist(),
            "coalitions": {
                str(mask): {"u": float(self.u[mask]), "delta": float(self.delta[mask])}
                for mask in range(1, 1 << self.n)
            },
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> GainReport:
        n = int(d["n"])
        u = np.zeros(1 << n)
        delta = np.zeros(1 << n)
        for key, cell in d["coalitions"].items():
            u[int(key)] = cell["u"]
            delta[int(key)] = cell["delta"]
        return cls(n, u, delta, np.array(d["pi"], dtype=float))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"


def build_report(scenario: Scenario) -> GainReport:
    """Evaluate every coalition of the scenario."""
    n = scenario.n
    if n > SUBSET_CAP:
        raise CapacityError(f"gain report requires n <= {SUBSET_CAP}")
    pi = np.array([minimal_price(i, scenario) for i in range(n)])
    u = np.zeros(1 << n)
    delta = np.zeros(1 << n)
    for mask in range(1, 1 << n):
        S = Coalition(mask, n)
        if mask & (mask - 1) == 0:
            u[mask] = pi[S.members[0]]
            continue
        u[mask] = _coalition_value(S, scenario)
        delta[mask] = u[mask] - sum(pi[i] for i in S.members)
    return GainReport(n, u, delta, pi)


def is_superadditive(report: GainReport) -> tuple[bool, tuple[Coalition, Coalition] | None]:
    """Check ``delta(S|T) >= delta(S) + delta(T)`` over all ordered disjoint pairs.

    Returns the first violating pair in (ascending S, ascending T) order.
    """
    n = report.n
    if n > SUPERADDITIVE_CAP:
        raise CapacityError(f"superadditivity check requires n <= {SUPERADDITIVE_CAP}")
    full = (1 << n) - 1
    d = report.delta.tolist()
    for S in range(1, full + 1):
        comp = full ^ S
        T = (0 - comp) & comp
        while T:
            if d[S | T] < d[S] + d[T] - SUPERADDITIVE_TOL:
                return False, (Coalition(S, n), Coalition(T, n))
            T = (T - comp) & comp
    return True, None
