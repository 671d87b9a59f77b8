import json
import math

import pytest
from hypothesis import given, strategies as st

from harvestlab.protocol import (
    DetectorParams,
    MeasurementKind,
    MeasurementSpec,
    Regime,
    ScenarioConfig,
    ScenarioError,
    classify_regime,
    effective_regime,
    load_scenario,
    save_scenario,
    scenario_from_dict,
    scenario_to_dict,
    validate_scenario,
)


def fig2_config(**meas):
    m = dict(kind="Selective", epsilon=0.0, xi=0.0)
    m.update(meas)
    return ScenarioConfig(
        DetectorParams(2.5, (0, 0, 0), 0.0),
        DetectorParams(2.5, (5, 0, 0), 0.0),
        DetectorParams(2.5, (2.5, 0, 0), -3.0),
        coupling=0.01,
        measurement=MeasurementSpec(**m),
    )


@pytest.mark.parametrize("eps, lam, expected", [
    (0.5, 0.01, Regime.NON_ORTHOGONAL),
    (0.0, 0.01, Regime.ORTHOGONAL),
    (0.01, 0.01, Regime.TRANSITION),
    (0.1, 0.01, Regime.NON_ORTHOGONAL),   # boundary eps = lam^1/2
    (0.001, 0.01, Regime.ORTHOGONAL),     # boundary eps = lam^3/2
])
def test_classify_examples(eps, lam, expected):
    assert classify_regime(eps, lam) is expected


@pytest.mark.parametrize("delta, expected", [
    (0, Regime.NON_ORTHOGONAL), (0.25, Regime.NON_ORTHOGONAL), (0.4, Regime.NON_ORTHOGONAL),
    (0.75, Regime.TRANSITION), (1, Regime.TRANSITION), (1.25, Regime.TRANSITION),
    (1.75, Regime.ORTHOGONAL), (2, Regime.ORTHOGONAL),
])
def test_classify_by_exponent(delta, expected):
    lam = 1e-2
    assert classify_regime(lam**delta, lam) is expected


_ORDER = {Regime.ORTHOGONAL: 0, Regime.TRANSITION: 1, Regime.NON_ORTHOGONAL: 2}


@given(st.floats(1e-6, 0.99), st.floats(0, 1), st.floats(0, 1))
def test_classify_monotone(lam, e1, e2):
    lo, hi = sorted((e1, e2))
    assert _ORDER[classify_regime(lo, lam)] <= _ORDER[classify_regime(hi, lam)]


@pytest.mark.parametrize("eps, lam", [(-0.1, 0.01), (1.1, 0.01), (0.5, 0.0), (0.5, 1.0)])
def test_classify_domain(eps, lam):
    with pytest.raises(ValueError):
        classify_regime(eps, lam)


def test_fig2_config_valid():
    cfg = fig2_config()
    assert validate_scenario(cfg) is cfg


def test_zero_coupling_rejected():
    cfg = fig2_config()
    bad = ScenarioConfig(cfg.detA, cfg.detB, cfg.detC, coupling=0.0, measurement=cfg.measurement)
    with pytest.raises(ScenarioError) as info:
        validate_scenario(bad)
    assert "coupling must be positive" in info.value.errors


def test_measurement_before_decoupling():
    cfg = fig2_config(measurement_time=-3.0 + 1.0)
    with pytest.raises(ScenarioError) as info:
        validate_scenario(cfg)
    assert any("t_C + 5T" in e for e in info.value.errors)
    validate_scenario(fig2_config(measurement_time=2.0))


def test_all_errors_collected():
    cfg = ScenarioConfig(
        DetectorParams(-1.0), DetectorParams(math.nan), DetectorParams(1.0),
        coupling=-1.0, measurement=MeasurementSpec("Selective", 2.0, 7.0),
    )
    with pytest.raises(ScenarioError) as info:
        validate_scenario(cfg)
    assert len(info.value.errors) == 5


def test_xi_range():
    with pytest.raises(ScenarioError):
        validate_scenario(fig2_config(xi=2 * math.pi))
    validate_scenario(fig2_config(xi=6.28))


def test_override_consistency():
    cfg = fig2_config()
    bad = ScenarioConfig(cfg.detA, cfg.detB, cfg.detC, measurement=cfg.measurement,
                         regime_override=Regime.BASELINE)
    with pytest.raises(ScenarioError):
        validate_scenario(bad)
    ok = ScenarioConfig(cfg.detA, cfg.detB, cfg.detC, measurement=MeasurementSpec(),
                        regime_override="Baseline")
    validate_scenario(ok)


def test_effective_regime():
    assert effective_regime(fig2_config()) is Regime.ORTHOGONAL
    assert effective_regime(fig2_config(epsilon=0.01)) is Regime.TRANSITION
    cfg = fig2_config()
    assert effective_regime(cfg.with_measurement(kind=MeasurementKind.NONE)) is Regime.BASELINE
    assert effective_regime(cfg.with_measurement(kind="NonSelective")) is Regime.NON_SELECTIVE


def test_json_round_trip(tmp_path):
    cfg = fig2_config(epsilon=0.3, xi=1.2, measurement_time=4.0)
    assert scenario_from_dict(json.loads(json.dumps(scenario_to_dict(cfg)))) == cfg
    path = tmp_path / "s.json"
    save_scenario(cfg, path)
    assert load_scenario(path) == cfg


def test_malformed_document():
    with pytest.raises(ScenarioError):
        scenario_from_dict({"detA": {"gap": 1.0}})
