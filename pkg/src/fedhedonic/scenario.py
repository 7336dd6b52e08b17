"""Scenario data model, loss evaluators, seeded generation and JSON I/O."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Literal

import numpy as np

from .errors import ScenarioError

SEED_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class GainFnSpec:
    """Monotone map from inverse loss to money: ``alpha*z`` or ``alpha*ln(1+z)``."""

    kind: Literal["linear", "log"] = "linear"
    alpha: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in ("linear", "log"):
            raise ValueError(f"unknown gain function kind {self.kind!r}")
        if not self.alpha > 0:
            raise ValueError("gain scale alpha must be positive")

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "alpha": self.alpha}


@dataclass(frozen=True)
class QuadraticLoss:
    """``(theta - target)^T H (theta - target) + noise_floor``."""

    target: np.ndarray
    curvature: np.ndarray
    noise_floor: float = 0.0

    kind = "quadratic"

    def __post_init__(self) -> None:
        H = self.curvature
        M = self.target.shape[0]
        if H.shape != (M, M):
            raise ValueError("curvature must be M x M")
        if not np.allclose(H, H.T, rtol=0.0, atol=1e-12):
            raise ValueError("curvature must be symmetric")
        if np.linalg.eigvalsh(H).min() < -1e-10:
            raise ValueError("curvature must be positive semidefinite")
        if self.noise_floor < 0:
            raise ValueError("noise floor must be nonnegative")

    def batch(self, thetas: np.ndarray) -> np.ndarray:
        d = np.atleast_2d(thetas) - self.target
        return np.einsum("ki,ij,kj->k", d, self.curvature, d) + self.noise_floor

    def __call__(self, theta: np.ndarray) -> float:
        return float(self.batch(theta)[0])

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "target": self.target.tolist(),
            "curvature": self.curvature.tolist(),
            "noise_floor": self.noise_floor,
        }


@dataclass(frozen=True)
class RegressionLoss:
    """Mean squared error of a linear model on a held-out set."""

    features: np.ndarray
    labels: np.ndarray

    kind = "regression"

    def __post_init__(self) -> None:
        if self.features.ndim != 2 or self.features.shape[0] == 0:
            raise ValueError("evaluation set must be non-empty")
        if self.labels.shape != (self.features.shape[0],):
            raise ValueError("labels must match feature rows")

    def batch(self, thetas: np.ndarray) -> np.ndarray:
        resid = np.atleast_2d(thetas) @ self.features.T - self.labels
        return np.mean(resid * resid, axis=1)

    def __call__(self, theta: np.ndarray) -> float:
        return float(self.batch(theta)[0])

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "features": self.features.tolist(),
            "labels": self.labels.tolist(),
        }


LossEvaluator = QuadraticLoss | RegressionLoss


@dataclass(frozen=True)
class AgentProfile:
    m: int
    p: float
    theta: np.ndarray
    local_loss: float

    def __post_init__(self) -> None:
        if self.m < 1:
            raise ValueError("data size must be at least 1")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("reliability must lie in [0, 1]")
        if not (self.local_loss >= 0 and math.isfinite(self.local_loss)):
            raise ValueError("local loss must be finite and nonnegative")
        if not np.all(np.isfinite(self.theta)):
            raise ValueError("parameters must be finite")


@dataclass(frozen=True)
class Scenario:
    agents: tuple[AgentProfile, ...]
    evaluator: LossEvaluator
    mae_theta: np.ndarray
    mae_weight: float
    gain_fn: GainFnSpec = field(default_factory=GainFnSpec)
    cost_per_agent: float = 0.0
    fallback_loss: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        M = self.mae_theta.shape[0]
        if any(a.theta.shape != (M,) for a in self.agents):
            raise ValueError("all parameter vectors must share one dimension")
        if not 0.0 <= self.mae_weight <= 1.0:
            raise ValueError("MAE weight must lie in [0, 1]")
        if self.cost_per_agent < 0:
            raise ValueError("cost per agent must be nonnegative")
        if not self.fallback_loss > 0:
            raise ValueError("fallback loss must be positive")

    @property
    def n(self) -> int:
        return len(self.agents)

    @property
    def M(self) -> int:
        return self.mae_theta.shape[0]

    @property
    def sizes(self) -> np.ndarray:
        return np.array([a.m for a in self.agents], dtype=float)

    @property
    def reliabilities(self) -> np.ndarray:
        return np.array([a.p for a in self.agents], dtype=float)

    @property
    def thetas(self) -> np.ndarray:
        return np.array([a.theta for a in self.agents], dtype=float).reshape(self.n, self.M)

    def to_dict(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "M": self.M,
            "agents": [
                {"m": a.m, "p": a.p, "theta": a.theta.tolist(), "local_loss": a.local_loss}
                for a in self.agents
            ],
            "evaluator": self.evaluator.to_dict(),
            "mae": {"theta": self.mae_theta.tolist(), "w": self.mae_weight},
            "gain_fn": self.gain_fn.to_dict(),
            "cost_per_agent": self.cost_per_agent,
            "fallback_loss": self.fallback_loss,
            "seed": self.seed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"

    def content_hash(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> Scenario:
        try:
            ev = d["evaluator"]
            if ev["kind"] == "quadratic":
                evaluator: LossEvaluator = QuadraticLoss(
                    np.array(ev["target"], dtype=float),
                    np.array(ev["curvature"], dtype=float),
                    float(ev["noise_floor"]),
                )
            elif ev["kind"] == "regression":
                evaluator = RegressionLoss(
                    np.array(ev["features"], dtype=float), np.array(ev["labels"], dtype=float)
                )
            else:
                raise ScenarioError(f"unknown evaluator kind {ev['kind']!r}")
            agents = tuple(
                AgentProfile(
                    int(a["m"]),
                    float(a["p"]),
                    np.array(a["theta"], dtype=float),
                    float(a["local_loss"]),
                )
                for a in d["agents"]
            )
            if len(agents) != d["n"]:
                raise ScenarioError("agent count does not match n")
            gf = d["gain_fn"]
            return cls(
                agents=agents,
                evaluator=evaluator,
                mae_theta=np.array(d["mae"]["theta"], dtype=float),
                mae_weight=float(d["mae"]["w"]),
                gain_fn=GainFnSpec(gf["kind"], float(gf["alpha"])),
                cost_per_agent=float(d["cost_per_agent"]),
                fallback_loss=float(d["fallback_loss"]),
                seed=int(d["seed"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ScenarioError):
                raise
            raise ScenarioError(f"invalid scenario document: {exc}") from exc

    @classmethod
    def from_json(cls, text: str) -> Scenario:
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path: str | Path) -> Scenario:
        return cls.from_json(Path(path).read_text())

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())


@dataclass(frozen=True)
class GenerationKnobs:
    """Knobs for :func:`generate_scenario`.

    ``spread`` scales how far local models sit from the optimum in quadratic
    mode (deviation ~ spread / sqrt(m_i)); ``spread=0`` is the infinite-data
    limit where every agent holds the optimum exactly.
    """

    evaluator: Literal["quadratic", "regression"] = "quadratic"
    m_range: tuple[int, int] = (10, 100)
    p_range: tuple[float, float] = (0.8, 1.0)
    spread: float = 2.0
    noise_floor: float = 0.01
    label_noise: float = 0.5
    holdout: int = 200
    mae_weight: float = 0.5
    mae_size: int = 20
    gain_fn: GainFnSpec = field(default_factory=GainFnSpec)
    cost_per_agent: float = 0.05
    fallback_loss: float | None = None

    def __post_init__(self) -> None:
        lo, hi = self.m_range
        if not 1 <= lo <= hi:
            raise ValueError("m_range must satisfy 1 <= low <= high")
        plo, phi = self.p_range
        if not 0.0 <= plo <= phi <= 1.0:
            raise ValueError("p_range must satisfy 0 <= low <= high <= 1")
        if self.spread < 0 or self.noise_floor < 0 or self.label_noise < 0:
            raise ValueError("spread and noise levels must be nonnegative")
        if self.holdout < 1 or self.mae_size < 1:
            raise ValueError("holdout and mae_size must be positive")
        if self.evaluator not in ("quadratic", "regression"):
            raise ValueError(f"unknown evaluator {self.evaluator!r}")
        if self.fallback_loss is not None and not self.fallback_loss > 0:
            raise ValueError("fallback loss must be positive")


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 stream keyed by a 64-bit seed (portable across platforms)."""
    if seed < 0 or seed > SEED_MASK:
        raise ValueError("seed must be a 64-bit unsigned integer")
    return np.random.Generator(np.random.PCG64(seed))


def _fit_least_squares(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    gram = X.T @ X
    if np.linalg.matrix_rank(gram) < X.shape[1]:
        raise np.linalg.LinAlgError("singular normal equations")
    return np.linalg.solve(gram, X.T @ y)


def generate_scenario(
    n: int, M: int, seed: int, knobs: GenerationKnobs | None = None
) -> Scenario:
    """Draw a reproducible synthetic scenario with ``n`` agents in dimension ``M``."""
    if n < 1 or M < 1:
        raise ValueError("n and M must be at least 1")
    knobs = knobs or GenerationKnobs()
    rng = make_rng(seed)
    sizes = rng.integers(knobs.m_range[0], knobs.m_range[1], size=n, endpoint=True)
    probs = rng.uniform(knobs.p_range[0], knobs.p_range[1], size=n)

    if knobs.evaluator == "quadratic":
        target = rng.standard_normal(M)
        Q = rng.standard_normal((M, M))
        H = Q @ Q.T / M + 0.1 * np.eye(M)
        H = (H + H.T) / 2
        evaluator: LossEvaluator = QuadraticLoss(target, H, knobs.noise_floor)
        thetas = [
            target + knobs.spread / math.sqrt(m) * rng.standard_normal(M) for m in sizes
        ]
        mae_theta = target + knobs.spread / math.sqrt(knobs.mae_size) * rng.standard_normal(M)
    else:
        w_true = rng.standard_normal(M)
        X_eval = rng.standard_normal((knobs.holdout, M))
        y_eval = X_eval @ w_true + knobs.label_noise * rng.standard_normal(knobs.holdout)
        evaluator = RegressionLoss(X_eval, y_eval)
        thetas = []
        for m in [*sizes.tolist(), knobs.mae_size]:
            X = rng.standard_normal((m, M))
            y = X @ w_true + knobs.label_noise * rng.standard_normal(m)
            for attempt in range(4):
                try:
                    thetas.append(_fit_least_squares(X, y))
                    break
                except np.linalg.LinAlgError:
                    if attempt == 3:
                        raise ScenarioError(
                            f"least-squares fit stayed singular after 3 retries (m={m}, M={M})"
                        ) from None
                    X = X + 1e-3 * rng.standard_normal(X.shape)
        mae_theta = thetas.pop()

    agents = tuple(
        AgentProfile(int(m), float(p), np.asarray(th, dtype=float), evaluator(th))
        for m, p, th in zip(sizes, probs, thetas)
    )
    fallback = knobs.fallback_loss
    if fallback is None:
        fallback = max(evaluator(mae_theta), 1e-6)
    return Scenario(
        agents=agents,
        evaluator=evaluator,
        mae_theta=np.asarray(mae_theta, dtype=float),
        mae_weight=knobs.mae_weight,
        gain_fn=knobs.gain_fn,
        cost_per_agent=knobs.cost_per_agent,
        fallback_loss=float(fallback),
        seed=seed,
    )
