"""Entanglement harvesting by two Unruh-DeWitt detectors when a third one,
coupled to the same field, is measured in between.

Modules:
  specfun          Faddeeva / error functions and adaptive quadrature
  protocol         scenario description and regime classification
  matrix_elements  second-order kernels L_IJ and M_IJ
  states           post-measurement two-detector density matrices
  negativity       exact and perturbative negativity
  harvestctl       figure presets, sweeps, acceptance suite (CLI)
"""

from .protocol import (
    DetectorParams,
    MeasurementKind,
    MeasurementSpec,
    Regime,
    ScenarioConfig,
    ScenarioError,
    classify_regime,
    validate_scenario,
)
from .matrix_elements import MatrixElementSet, element_set
from .states import TwoQubitState, assemble_state
from .negativity import negativity_exact

__version__ = "0.1.0"
