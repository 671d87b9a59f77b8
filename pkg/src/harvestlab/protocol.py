"""Experiment description: detectors, measurement, and regime classification.

Natural units with the switching width T = 1: gaps are in units of 1/T,
positions and times in units of T.  The coupling strength is dimensionless.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

__all__ = [
    "Regime",
    "MeasurementKind",
    "DetectorParams",
    "MeasurementSpec",
    "ScenarioConfig",
    "ScenarioError",
    "DECOUPLING_DELAY",
    "classify_regime",
    "effective_regime",
    "validate_scenario",
    "scenario_from_dict",
    "scenario_to_dict",
    "load_scenario",
    "save_scenario",
]

# A Gaussian-switched detector counts as decoupled this many T after its peak.
DECOUPLING_DELAY = 5.0
MAX_COUPLING = 0.3


class Regime(str, enum.Enum):
    NON_ORTHOGONAL = "NonOrthogonal"
    ORTHOGONAL = "Orthogonal"
    TRANSITION = "Transition"
    BASELINE = "Baseline"
    NON_SELECTIVE = "NonSelective"


class MeasurementKind(str, enum.Enum):
    NONE = "None"
    SELECTIVE = "Selective"
    NON_SELECTIVE = "NonSelective"


class ScenarioError(ValueError):
    """A scenario failed validation.  ``errors`` lists every violation."""

    def __init__(self, errors: Sequence[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class DetectorParams:
    gap: float
    position: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    switch_peak: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "position", tuple(float(x) for x in self.position))
        object.__setattr__(self, "gap", float(self.gap))
        object.__setattr__(self, "switch_peak", float(self.switch_peak))

    def problems(self, label: str) -> List[str]:
        out = []
        if len(self.position) != 3:
            out.append(f"{label}: position must have three components")
        vals = (self.gap, self.switch_peak) + tuple(self.position)
        if not all(math.isfinite(v) for v in vals):
            out.append(f"{label}: all fields must be finite")
        elif self.gap < 0:
            out.append(f"{label}: gap must be non-negative")
        return out


@dataclass(frozen=True)
class MeasurementSpec:
    kind: MeasurementKind = MeasurementKind.NONE
    epsilon: float = 0.0
    xi: float = 0.0
    measurement_time: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", MeasurementKind(self.kind))


@dataclass(frozen=True)
class ScenarioConfig:
    detA: DetectorParams
    detB: DetectorParams
    detC: DetectorParams
    coupling: float = 0.01
    measurement: MeasurementSpec = field(default_factory=MeasurementSpec)
    regime_override: Optional[Regime] = None

    def __post_init__(self):
        if self.regime_override is not None:
            object.__setattr__(self, "regime_override", Regime(self.regime_override))

    def detectors(self):
        return {"A": self.detA, "B": self.detB, "C": self.detC}

    def with_measurement(self, **changes) -> "ScenarioConfig":
        return replace(self, measurement=replace(self.measurement, **changes))


def classify_regime(epsilon: float, lam: float) -> Regime:
    """Place a single (epsilon, lambda) point in a scaling regime.

    epsilon >= lambda**0.5 is non-orthogonal, epsilon <= lambda**1.5 is
    orthogonal, and everything in between is the transition regime.
    """
    if not (0.0 < lam < 1.0):
        raise ValueError("lambda must lie in (0, 1)")
    if not (0.0 <= epsilon <= 1.0):
        raise ValueError("epsilon must lie in [0, 1]")
    if epsilon >= math.sqrt(lam):
        return Regime.NON_ORTHOGONAL
    if epsilon <= lam**1.5:
        return Regime.ORTHOGONAL
    return Regime.TRANSITION


def validate_scenario(cfg: ScenarioConfig) -> ScenarioConfig:
    """Return ``cfg`` unchanged or raise ScenarioError listing all problems."""
    errors: List[str] = []
    for label, det in cfg.detectors().items():
        errors.extend(det.problems(f"detector {label}"))

    lam = cfg.coupling
    if not math.isfinite(lam):
        errors.append("coupling must be finite")
    elif lam <= 0:
        errors.append("coupling must be positive")
    elif lam > MAX_COUPLING:
        errors.append(f"coupling must not exceed {MAX_COUPLING}")

    m = cfg.measurement
    if not (math.isfinite(m.epsilon) and 0.0 <= m.epsilon <= 1.0):
        errors.append("epsilon must lie in [0, 1]")
    if not (math.isfinite(m.xi) and 0.0 <= m.xi < 2 * math.pi):
        errors.append("xi must lie in [0, 2*pi)")
    if m.measurement_time is not None:
        earliest = cfg.detC.switch_peak + DECOUPLING_DELAY
        if not math.isfinite(m.measurement_time):
            errors.append("measurement_time must be finite")
        elif m.measurement_time < earliest:
            errors.append(
                f"measurement_time {m.measurement_time:g} is earlier than "
                f"t_C + 5T = {earliest:g}; detector C is not yet decoupled"
            )

    reg = cfg.regime_override
    if reg is not None:
        if (reg is Regime.BASELINE) != (m.kind is MeasurementKind.NONE):
            errors.append("Baseline regime requires measurement kind None and vice versa")
        if (reg is Regime.NON_SELECTIVE) != (m.kind is MeasurementKind.NON_SELECTIVE):
            errors.append("NonSelective regime requires measurement kind NonSelective and vice versa")

    if errors:
        raise ScenarioError(errors)
    return cfg


def effective_regime(cfg: ScenarioConfig) -> Regime:
    """The regime a scenario is evaluated in: override first, then kind, then epsilon."""
    if cfg.regime_override is not None:
        return cfg.regime_override
    kind = cfg.measurement.kind
    if kind is MeasurementKind.NONE:
        return Regime.BASELINE
    if kind is MeasurementKind.NON_SELECTIVE:
        return Regime.NON_SELECTIVE
    return classify_regime(cfg.measurement.epsilon, cfg.coupling)


# ---------------------------------------------------------------------------
# JSON scenario documents
# ---------------------------------------------------------------------------

def _det_to_dict(d: DetectorParams) -> dict:
    return {"gap": d.gap, "position": list(d.position), "switch_peak": d.switch_peak}


def _det_from_dict(d: dict) -> DetectorParams:
    return DetectorParams(
        gap=d["gap"], position=tuple(d.get("position", (0.0, 0.0, 0.0))),
        switch_peak=d.get("switch_peak", 0.0),
    )


def scenario_to_dict(cfg: ScenarioConfig) -> dict:
    m = cfg.measurement
    out = {
        "detA": _det_to_dict(cfg.detA),
        "detB": _det_to_dict(cfg.detB),
        "detC": _det_to_dict(cfg.detC),
        "coupling": cfg.coupling,
        "measurement": {
            "kind": m.kind.value,
            "epsilon": m.epsilon,
            "xi": m.xi,
            "measurement_time": m.measurement_time,
        },
    }
    if cfg.regime_override is not None:
        out["regime_override"] = cfg.regime_override.value
    return out


def scenario_from_dict(doc: dict) -> ScenarioConfig:
    """Build a ScenarioConfig from a parsed JSON document (not validated)."""
    try:
        meas = doc.get("measurement", {})
        cfg = ScenarioConfig(
            detA=_det_from_dict(doc["detA"]),
            detB=_det_from_dict(doc["detB"]),
            detC=_det_from_dict(doc["detC"]),
            coupling=float(doc.get("coupling", 0.01)),
            measurement=MeasurementSpec(
                kind=meas.get("kind", "None"),
                epsilon=float(meas.get("epsilon", 0.0)),
                xi=float(meas.get("xi", 0.0)),
                measurement_time=meas.get("measurement_time"),
            ),
            regime_override=doc.get("regime_override"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError([f"malformed scenario document: {exc}"]) from exc
    return cfg


def load_scenario(path: Union[str, Path]) -> ScenarioConfig:
    with open(path) as fh:
        return scenario_from_dict(json.load(fh))


def save_scenario(cfg: ScenarioConfig, path: Union[str, Path]) -> None:
    with open(path, "w") as fh:
        json.dump(scenario_to_dict(cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")
