"""Small builders shared by the test modules."""

from __future__ import annotations

import numpy as np

from fedhedonic.combinatorics import pairs_of
from fedhedonic.hedonic import MutualGainVector
from fedhedonic.scenario import AgentProfile, GainFnSpec, QuadraticLoss, Scenario


def quad_scenario(
    thetas,
    sizes,
    probs,
    target=None,
    curvature=None,
    noise_floor=0.0,
    mae_theta=None,
    mae_weight=0.5,
    gain_fn=None,
    cost=0.0,
    fallback_loss=1.0,
) -> Scenario:
    thetas = [np.atleast_1d(np.asarray(t, dtype=float)) for t in thetas]
    M = thetas[0].shape[0]
    target = np.zeros(M) if target is None else np.asarray(target, dtype=float)
    H = np.eye(M) if curvature is None else np.asarray(curvature, dtype=float)
    ev = QuadraticLoss(target, H, noise_floor)
    agents = tuple(AgentProfile(int(m), float(p), t, ev(t)) for t, m, p in zip(thetas, sizes, probs))
    mae = np.zeros(M) if mae_theta is None else np.atleast_1d(np.asarray(mae_theta, dtype=float))
    return Scenario(agents, ev, mae, mae_weight, gain_fn or GainFnSpec(), cost, fallback_loss)


def random_v(rng: np.random.Generator, n: int, scale: float = 1.0) -> MutualGainVector:
    return MutualGainVector(n, scale * rng.standard_normal(len(pairs_of(range(n)))))


def v_of(n: int, gains: dict) -> MutualGainVector:
    return MutualGainVector.from_pairs(n, gains)
