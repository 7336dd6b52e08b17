import json
import math
from pathlib import Path

import jsonschema
import numpy as np
import pytest

from fedhedonic.combinatorics import Coalition, enumerate_subsets
from fedhedonic.errors import DomainError
from fedhedonic.gains import (
    INVERSE_LOSS_CAP,
    GainReport,
    build_report,
    cluster_gain,
    gain_fn_eval,
    is_superadditive,
    marginal_gain,
    minimal_price,
)
from fedhedonic.learning import expected_loss
from fedhedonic.scenario import (
    AgentProfile,
    GainFnSpec,
    GenerationKnobs,
    QuadraticLoss,
    Scenario,
    generate_scenario,
)

SCHEMAS = Path(__file__).resolve().parents[1] / "docs" / "schemas"


def hand_scenario(local_losses, probs, noise_floor, cost=0.0, gain_fn=None):
    ev = QuadraticLoss(np.zeros(1), np.eye(1), noise_floor)
    agents = tuple(AgentProfile(1, p, np.zeros(1), L) for L, p in zip(local_losses, probs))
    return Scenario(agents, ev, np.zeros(1), 0.5, gain_fn or GainFnSpec(), cost)


def test_gain_fn_values():
    assert gain_fn_eval(GainFnSpec("linear", 1.0), 2.0) == 2.0
    assert gain_fn_eval(GainFnSpec("log", 1.0), 1e-300) == pytest.approx(0.0)
    assert gain_fn_eval(GainFnSpec("log", 2.0), math.e - 1) == pytest.approx(2.0)
    with pytest.raises(DomainError):
        gain_fn_eval(GainFnSpec(), 0.0)


def test_minimal_price_cases():
    sc = hand_scenario([1.0, 0.4, 3.0], [1.0, 0.8, 0.0], 0.1, gain_fn=GainFnSpec("log", 1.0))
    assert minimal_price(2, sc) == 0.0
    lin = hand_scenario([1.0, 0.4], [1.0, 0.8], 0.1)
    assert minimal_price(0, lin) == pytest.approx(1.0)
    assert minimal_price(1, lin) == pytest.approx(2.0)


def test_minimal_price_caps_tiny_loss(caplog):
    sc = hand_scenario([0.0], [1.0], 0.0)
    assert minimal_price(0, sc) == INVERSE_LOSS_CAP
    assert "capping" in caplog.text


def test_cluster_gain_worked_case():
    # both agents always received at the optimum, so expected_loss({0,1}) = noise floor 0.5
    sc = hand_scenario([1 / 0.7, 1 / 0.7], [1.0, 1.0], 0.5, cost=0.1)
    S = Coalition.of([0, 1], 2)
    assert expected_loss(S, sc) == pytest.approx(0.5)
    assert cluster_gain(S, sc) == pytest.approx(1.8)
    assert minimal_price(0, sc) == pytest.approx(0.7)
    assert marginal_gain(S, sc) == pytest.approx(0.4)


def test_cluster_gain_empty_and_singleton():
    sc = generate_scenario(3, 2, 5)
    assert cluster_gain(Coalition(0, 3), sc) == 0.0
    for i in range(3):
        assert cluster_gain(Coalition.of([i], 3), sc) == minimal_price(i, sc)
        assert marginal_gain(Coalition.of([i], 3), sc) == 0.0


def test_marginal_gain_zero_when_gain_equals_prices():
    # one agent at 1/(2L) price each; grand gain 1/L with zero cost and L fixed
    sc = hand_scenario([2.0, 2.0], [1.0, 1.0], 1.0)
    assert marginal_gain(Coalition.grand(2), sc) == pytest.approx(0.0)


@pytest.mark.parametrize("seed", range(5))
def test_report_matches_direct_calls(seed):
    sc = generate_scenario(4, 2, seed)
    rep = build_report(sc)
    for S in enumerate_subsets(4):
        assert rep.u[S.mask] == pytest.approx(cluster_gain(S, sc), rel=1e-12)
        assert rep.delta[S.mask] == pytest.approx(marginal_gain(S, sc), rel=1e-12, abs=1e-12)
        # identity: delta = u - sum of prices for |S| >= 2
        if len(S) >= 2:
            assert rep.delta[S.mask] == pytest.approx(rep.u[S.mask] - sum(rep.pi[i] for i in S), abs=1e-9)


def test_report_roundtrip_and_schema():
    rep = build_report(generate_scenario(3, 2, 1))
    d = json.loads(rep.to_json())
    jsonschema.validate(d, json.loads((SCHEMAS / "gain-report.schema.json").read_text()))
    back = GainReport.from_dict(d)
    assert np.array_equal(back.u, rep.u) and np.array_equal(back.delta, rep.delta)


def test_superadditive_cases():
    assert is_superadditive(GainReport.from_delta(3, np.zeros(8))) == (True, None)
    quad = [bin(m).count("1") ** 2 - bin(m).count("1") for m in range(1 << 4)]
    assert is_superadditive(GainReport.from_delta(4, quad))[0]
    ok, witness = is_superadditive(GainReport.from_delta(2, [0, 0, 0, -1]))
    assert not ok
    assert witness == (Coalition.of([0], 2), Coalition.of([1], 2))


def test_report_invariants_rejected():
    with pytest.raises(ValueError):
        GainReport(2, np.zeros(4), np.array([0.0, 1.0, 0.0, 0.0]), np.zeros(2))


def test_scenario_schema_validation():
    schema = json.loads((SCHEMAS / "scenario.schema.json").read_text())
    for evaluator in ("quadratic", "regression"):
        sc = generate_scenario(4, 2, 9, GenerationKnobs(evaluator=evaluator))
        jsonschema.validate(json.loads(sc.to_json()), schema)
