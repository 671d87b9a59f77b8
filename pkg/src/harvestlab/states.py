"""Two-detector density matrices after detector C is measured.

Basis order is {|g_A g_B>, |g_A e_B>, |e_A g_B>, |e_A e_B>}; numpy indices
0..3.  The joint state of A and B is built from the second-order blocks

* rho0   = |g_A g_B><g_A g_B|
* rho2   - no measurement (local noise L_II, exchange L_AB, pair term M_AB)
* gamma  - interference between the unexcited and excited branches of C;
  first order in the overlap epsilon
* nu     - L_CC times the rho2 pattern built from the "tilde" elements

and combined according to the scaling regime of epsilon against lambda.

The gamma block couples |g_A g_B> to |e_A g_B> through the A-C kernels and to
|g_A e_B> through the B-C kernels: a first-order excitation of A in one
branch and of C in the other leaves A excited.
"""

from __future__ import annotations

import contextlib
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .matrix_elements import MatrixElementSet
from .protocol import MeasurementKind, Regime, ScenarioConfig, classify_regime, effective_regime

__all__ = [
    "TwoQubitState",
    "TildeElements",
    "PrimedElements",
    "DegenerateMeasurement",
    "InconsistentRegime",
    "rho0_block",
    "rho2_block",
    "gamma_block",
    "nu_block",
    "tilde_elements",
    "primed_elements",
    "assemble_state",
    "outcome_probability",
    "matrix_to_text",
    "matrix_from_text",
    "fault_injection",
]

GG, GE, EG, EE = 0, 1, 2, 3

# Test hook: multiplies the gamma block (see fault_injection).
_GAMMA_SIGN = 1.0


class DegenerateMeasurement(ValueError):
    """The measurement normalisation (L_CC or epsilon^2 + L_CC) vanishes."""


class InconsistentRegime(ValueError):
    """The requested regime formula does not match epsilon and lambda."""


@contextlib.contextmanager
def fault_injection(gamma_sign: float = -1.0):
    """Temporarily flip the gamma block.  Used to check that the acceptance
    suite notices a wrong interference term."""
    global _GAMMA_SIGN
    old = _GAMMA_SIGN
    _GAMMA_SIGN = gamma_sign
    try:
        yield
    finally:
        _GAMMA_SIGN = old


@dataclass
class TwoQubitState:
    matrix: np.ndarray
    regime: Regime
    order_note: str = "lambda^2"
    meta: dict = field(default_factory=dict)

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))

    def trace_error(self) -> float:
        return float(abs(np.trace(self.matrix) - 1.0))

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.matrix).min())

    def to_text(self) -> str:
        return matrix_to_text(self.matrix)


@dataclass(frozen=True)
class TildeElements:
    Lt_AA: float
    Lt_BB: float
    Lt_AB: complex
    Mt_AB: complex


@dataclass(frozen=True)
class PrimedElements:
    Lp_A: complex
    Lp_B: complex
    Lp_AA: float
    Lp_BB: float
    Lp_AB: complex
    Mp_AB: complex


def rho0_block() -> np.ndarray:
    m = np.zeros((4, 4), dtype=complex)
    m[GG, GG] = 1.0
    return m


def _pattern(l_aa, l_bb, l_ab, m_ab) -> np.ndarray:
    m = np.zeros((4, 4), dtype=complex)
    m[GG, GG] = -l_aa - l_bb
    m[GE, GE] = l_bb
    m[EG, EG] = l_aa
    m[EG, GE] = l_ab
    m[GE, EG] = np.conj(l_ab)
    m[EE, GG] = m_ab
    m[GG, EE] = np.conj(m_ab)
    return m


def rho2_block(E: MatrixElementSet) -> np.ndarray:
    """Second-order correction without measurement (traceless)."""
    return _pattern(E.L_AA, E.L_BB, E.L_AB, E.M_AB)


def gamma_block(E: MatrixElementSet, epsilon: float, xi: float) -> np.ndarray:
    """Interference block, epsilon sqrt(1 - epsilon^2) (X + X^dagger).

    X has (e_A g_B, g_A g_B) = e^{i xi} L_AC + e^{-i xi} M_AC and
    (g_A e_B, g_A g_B) = e^{i xi} L_BC + e^{-i xi} M_BC.
    """
    c = _GAMMA_SIGN * epsilon * math.sqrt(max(0.0, 1.0 - epsilon * epsilon))
    ph = np.exp(1j * xi)
    m = np.zeros((4, 4), dtype=complex)
    m[EG, GG] = c * (ph * E.L_AC + np.conj(ph) * E.M_AC)
    m[GE, GG] = c * (ph * E.L_BC + np.conj(ph) * E.M_BC)
    return m + m.conj().T


def tilde_elements(E: MatrixElementSet) -> TildeElements:
    """Elements dressed by the excitation of C (orthogonal-outcome state)."""
    if E.L_CC <= 0:
        raise DegenerateMeasurement("L_CC must be positive")
    lcc = E.L_CC
    return TildeElements(
        Lt_AA=E.L_AA + (abs(E.L_AC) ** 2 + abs(E.M_AC) ** 2) / lcc,
        Lt_BB=E.L_BB + (abs(E.L_BC) ** 2 + abs(E.M_BC) ** 2) / lcc,
        Lt_AB=E.L_AB + (E.L_AC * np.conj(E.L_BC) + E.M_AC * np.conj(E.M_BC)) / lcc,
        Mt_AB=E.M_AB + (E.L_AC * E.M_BC + E.L_BC * E.M_AC) / lcc,
    )


def nu_block(E: MatrixElementSet) -> np.ndarray:
    t = tilde_elements(E)
    return E.L_CC * _pattern(t.Lt_AA, t.Lt_BB, t.Lt_AB, t.Mt_AB)


def primed_elements(E: MatrixElementSet, epsilon: float, xi: float) -> PrimedElements:
    """Entries of the transition-regime state (epsilon comparable to lambda).

    Lp_I is the (I excited, g_A g_B) entry to first order,
    epsilon / (epsilon^2 + L_CC) (e^{i xi} L_IC + e^{-i xi} M_IC).
    """
    den = epsilon * epsilon + E.L_CC
    if den <= 0:
        raise DegenerateMeasurement("epsilon^2 + L_CC must be positive")
    ph = np.exp(1j * xi)
    pre = epsilon / den
    return PrimedElements(
        Lp_A=complex(pre * (ph * E.L_AC + np.conj(ph) * E.M_AC)),
        Lp_B=complex(pre * (ph * E.L_BC + np.conj(ph) * E.M_BC)),
        Lp_AA=float(E.L_AA + (abs(E.L_AC) ** 2 + abs(E.M_AC) ** 2) / den),
        Lp_BB=float(E.L_BB + (abs(E.L_BC) ** 2 + abs(E.M_BC) ** 2) / den),
        Lp_AB=complex(E.L_AB + (E.L_AC * np.conj(E.L_BC) + E.M_AC * np.conj(E.M_BC)) / den),
        Mp_AB=complex(E.M_AB + (E.L_AC * E.M_BC + E.L_BC * E.M_AC) / den),
    )


def _repair_trace(m: np.ndarray) -> np.ndarray:
    m = m.copy()
    m[GG, GG] = 1.0 - (m[GE, GE].real + m[EG, EG].real + m[EE, EE].real)
    return m


def _resolve_regime(cfg: ScenarioConfig, regime: Optional[Regime]) -> Regime:
    natural = effective_regime(cfg)
    if regime is None:
        return natural
    regime = Regime(regime)
    if regime in (Regime.BASELINE, Regime.NON_SELECTIVE):
        return regime
    if cfg.regime_override is not None or regime is natural:
        return regime
    if cfg.measurement.kind is not MeasurementKind.SELECTIVE:
        raise InconsistentRegime(f"{regime.value} requires a selective measurement")
    actual = classify_regime(cfg.measurement.epsilon, cfg.coupling)
    raise InconsistentRegime(
        f"{regime.value} requested but epsilon={cfg.measurement.epsilon:g}, "
        f"lambda={cfg.coupling:g} classify as {actual.value}; set regime_override"
    )


def assemble_state(cfg: ScenarioConfig, E: MatrixElementSet,
                   regime: Optional[Regime] = None) -> TwoQubitState:
    """Joint state of A and B at order lambda^2 for the chosen regime.

    Baseline / NonSelective: rho0 + rho2.
    NonOrthogonal: rho0 + rho2 + gamma/eps^2 - L_CC gamma/eps^4.
    Orthogonal:    rho0 + (gamma + nu)/L_CC.
    Transition:    rho0 + (gamma + nu + eps^2 rho2)/(eps^2 + L_CC).
    The (gg, gg) entry is finally set so that the trace is exactly one.
    """
    reg = _resolve_regime(cfg, regime)
    eps = cfg.measurement.epsilon
    xi = cfg.measurement.xi
    r0 = rho0_block()
    if reg in (Regime.BASELINE, Regime.NON_SELECTIVE):
        m = r0 + rho2_block(E)
    elif reg is Regime.NON_ORTHOGONAL:
        if eps <= 0:
            raise InconsistentRegime("NonOrthogonal formula needs epsilon > 0")
        g = gamma_block(E, eps, xi)
        m = r0 + rho2_block(E) + g / eps**2 - E.L_CC * g / eps**4
    elif reg is Regime.ORTHOGONAL:
        if E.L_CC <= 0:
            raise DegenerateMeasurement("L_CC must be positive")
        m = r0 + (gamma_block(E, eps, xi) + nu_block(E)) / E.L_CC
    elif reg is Regime.TRANSITION:
        den = eps * eps + E.L_CC
        if den <= 0:
            raise DegenerateMeasurement("epsilon^2 + L_CC must be positive")
        m = r0 + (gamma_block(E, eps, xi) + nu_block(E) + eps * eps * rho2_block(E)) / den
    else:  # pragma: no cover - enum is closed
        raise InconsistentRegime(str(reg))
    return TwoQubitState(_repair_trace(m), reg, meta={"epsilon": eps, "xi": xi})


def outcome_probability(E: MatrixElementSet, epsilon: float) -> float:
    """Leading-order probability of the outcome: eps^2 + L_CC (1 - 2 eps^2)."""
    if not (0.0 <= epsilon <= 1.0):
        raise ValueError("epsilon must lie in [0, 1]")
    p = epsilon * epsilon + E.L_CC * (1.0 - 2.0 * epsilon * epsilon)
    return min(1.0, max(0.0, p))


def matrix_to_text(m: np.ndarray) -> str:
    """Row-major dump, one row per line, entries as 're,im' separated by spaces."""
    rows = []
    for row in np.asarray(m, dtype=complex):
        rows.append(" ".join(f"{z.real:.17e},{z.imag:.17e}" for z in row))
    return "\n".join(rows) + "\n"


def matrix_from_text(text: str) -> np.ndarray:
    rows = []
    for line in text.strip().splitlines():
        vals = []
        for tok in line.split():
            re_, im_ = tok.split(",")
            vals.append(complex(float(re_), float(im_)))
        rows.append(vals)
    return np.array(rows, dtype=complex)
