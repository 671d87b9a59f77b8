"""harvestctl - figure presets, parameter sweeps and the acceptance suite.

Usage::

    harvestctl preset Fig2 --out fig2.json        # write the sweep spec
    harvestctl run scenario.json                   # one scenario, all regimes
    harvestctl sweep fig2.json --out fig2.csv --jobs 4
    harvestctl sweep Fig7 --out fig7.csv           # a preset name works too
    harvestctl accept                              # full acceptance suite
    harvestctl accept orthogonal-fig2              # a single suite

Element kernels are cached per process; set HARVESTLAB_CACHE_DIR to persist
them between runs.
"""

from __future__ import annotations

import argparse
import concurrent.futures as cf
import copy
import io
import json
import logging
import math
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import matrix_elements as me
from .matrix_elements import (
    ElementCache,
    GeometryPair,
    MatrixElementSet,
    element_set,
    local_L,
    local_L_integral,
    nonlocal_L,
    nonlocal_L_closed,
    random_element_set,
)
from .negativity import (
    RESIDUAL_CONSTANT,
    Method,
    negativity_baseline,
    negativity_exact,
    negativity_orthogonal,
    partial_transpose_B,
    perturbative_roots,
    pt_eigenvalues,
    eq25_matrix,
    transition_closed_form,
)
from .protocol import (
    DetectorParams,
    MeasurementKind,
    MeasurementSpec,
    Regime,
    ScenarioConfig,
    scenario_from_dict,
    scenario_to_dict,
    validate_scenario,
)
from .specfun import DEFAULT_REL_TOL, erf_complex, erfc_real, erfi_complex, faddeeva
from .states import assemble_state, fault_injection, outcome_probability, tilde_elements

log = logging.getLogger("harvestctl")

__all__ = [
    "SweepSpec",
    "SweepRecord",
    "PRESETS",
    "preset",
    "run_scenario",
    "sweep",
    "write_csv",
    "format_float",
    "acceptance",
    "residual_suite",
    "main",
]

AXES = ("Delta_AC", "Delta_CA", "Omega", "xi", "epsilon")
XI_SERIES = (0.0, math.pi / 2, math.pi, 3 * math.pi / 2)
DEFAULT_LAMBDA = 0.01


def format_float(x: float) -> str:
    """Fixed scientific notation with 12 significant digits."""
    return f"{float(x):.11e}"


# ---------------------------------------------------------------------------
# Sweep description
# ---------------------------------------------------------------------------

@dataclass
class SweepSpec:
    """A family of scenarios along one axis.

    ``series`` is a list of overrides (keys ``gap`` and/or ``xi``) applied to
    ``base``; each series gets its own output columns.
    """

    base: ScenarioConfig
    axis: str
    grid: List[float]
    regimes: List[Regime]
    series: List[Dict[str, float]] = field(default_factory=lambda: [{}])
    output_path: Optional[str] = None
    name: str = "custom"

    def __post_init__(self):
        self.grid = [float(g) for g in self.grid]
        self.regimes = [Regime(r) for r in self.regimes]
        if self.axis not in AXES:
            raise ValueError(f"axis must be one of {AXES}")
        if not self.grid:
            raise ValueError("grid must be non-empty")
        if any(b <= a for a, b in zip(self.grid, self.grid[1:])):
            raise ValueError("grid must be strictly increasing")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "scenario": scenario_to_dict(self.base),
            "axis": self.axis,
            "grid": self.grid,
            "regimes": [r.value for r in self.regimes],
            "series": self.series,
            "output_path": self.output_path,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SweepSpec":
        if "preset" in doc:
            spec = preset(doc["preset"], lam=doc.get("coupling", DEFAULT_LAMBDA))
            for key in ("grid", "regimes", "series", "output_path"):
                if key in doc:
                    setattr(spec, key, doc[key])
            spec.__post_init__()
            return spec
        return cls(
            base=scenario_from_dict(doc["scenario"]),
            axis=doc["axis"],
            grid=doc["grid"],
            regimes=doc.get("regimes", ["Baseline"]),
            series=doc.get("series", [{}]),
            output_path=doc.get("output_path"),
            name=doc.get("name", "custom"),
        )


@dataclass
class SweepRecord:
    axis_value: float
    negativity_per_regime: Dict[str, Tuple[float, str, float]]
    prob_outcome: float
    element_snapshot: Optional[str] = None
    error: Optional[str] = None


def series_label(s: Dict[str, float]) -> str:
    if not s:
        return ""
    return ";".join(f"{k}={format_float(v)}" for k, v in sorted(s.items()))


def apply_axis(cfg: ScenarioConfig, axis: str, value: float) -> ScenarioConfig:
    """Return ``cfg`` with the swept quantity set to ``value``."""
    tA = cfg.detA.switch_peak
    if axis == "Delta_AC":  # Delta_AC = t_A - t_C
        return replace(cfg, detC=replace(cfg.detC, switch_peak=tA - value))
    if axis == "Delta_CA":  # Delta_CA = t_C - t_A
        return replace(cfg, detC=replace(cfg.detC, switch_peak=tA + value))
    if axis == "Omega":
        return replace(
            cfg,
            detA=replace(cfg.detA, gap=value),
            detB=replace(cfg.detB, gap=value),
            detC=replace(cfg.detC, gap=value),
        )
    if axis == "xi":
        return cfg.with_measurement(xi=value)
    if axis == "epsilon":
        return cfg.with_measurement(epsilon=value)
    raise ValueError(f"unknown axis {axis}")


def apply_series(cfg: ScenarioConfig, s: Dict[str, float]) -> ScenarioConfig:
    for k, v in s.items():
        if k == "gap":
            cfg = apply_axis(cfg, "Omega", v)
        elif k == "xi":
            cfg = cfg.with_measurement(xi=v)
        elif k == "epsilon":
            cfg = cfg.with_measurement(epsilon=v)
        else:
            raise ValueError(f"unknown series key {k}")
    return cfg


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------

def _three(gap, xa, xb, xc, ta, tb, tc):
    return (DetectorParams(gap, (xa, 0.0, 0.0), ta),
            DetectorParams(gap, (xb, 0.0, 0.0), tb),
            DetectorParams(gap, (xc, 0.0, 0.0), tc))


def _grid(lo, hi, step):
    n = int(round((hi - lo) / step))
    return [round(lo + i * step, 12) for i in range(n + 1)]


def preset(fig_id: str, lam: float = DEFAULT_LAMBDA) -> SweepSpec:
    """Geometry, gaps, regime and default grid for one of the figure setups.

    Geometries (all detectors on the x axis, T = 1):
      Fig2     L_AC = L_BC = L_AB/2 = 2.5, Delta_AB = 0, C earlier by Delta_AC
      Fig3     the same with L_AC = L_BC = L_AB/2 = 5
      Fig5     all co-located, t_B - t_A = 5, C earlier than A by Delta_AC
      Fig6like co-located, t_B - t_A = 5, C between them (axis Delta_CA)
      Fig7/8/9 transition-regime versions of Fig2/Fig5/Fig6like at gap 2.5
    """
    key = fig_id.lower()
    if key not in _PRESET_TABLE:
        raise ValueError(f"unknown preset {fig_id!r}; choose from {sorted(PRESETS)}")
    name, geo, axis, grid, gaps, transition = _PRESET_TABLE[key]
    dets = _three(gaps[0], *geo)
    if transition:
        meas = MeasurementSpec(MeasurementKind.SELECTIVE, epsilon=lam, xi=0.0)
        regimes = [Regime.BASELINE, Regime.TRANSITION]
        series = [{"xi": x} for x in XI_SERIES]
    else:
        meas = MeasurementSpec(MeasurementKind.SELECTIVE, epsilon=0.0, xi=0.0)
        regimes = [Regime.BASELINE, Regime.ORTHOGONAL]
        series = [{"gap": g} for g in gaps]
    cfg = ScenarioConfig(*dets, coupling=lam, measurement=meas)
    validate_scenario(cfg)
    return SweepSpec(cfg, axis, grid, regimes, series, name=name)


_ORTHO_GAPS = (1.5, 2.0, 2.5, 3.0)
# Harvesting at L_AB = 10 needs larger gaps (optimum near L_AB / 2 = 5).
_FAR_GAPS = (5.0, 5.5, 6.0, 6.5)
_PRESET_TABLE = {
    # name, (xA, xB, xC, tA, tB, tC), axis, grid, gaps, transition
    "fig2": ("Fig2", (0.0, 5.0, 2.5, 0.0, 0.0, 0.0), "Delta_AC", _grid(0, 20, 0.25), _ORTHO_GAPS, False),
    "fig3": ("Fig3", (0.0, 10.0, 5.0, 0.0, 0.0, 0.0), "Delta_AC", _grid(0, 20, 0.25), _FAR_GAPS, False),
    "fig5": ("Fig5", (0.0, 0.0, 0.0, 0.0, 5.0, 0.0), "Delta_AC", _grid(0, 20, 0.25), _ORTHO_GAPS, False),
    "fig6like": ("Fig6like", (0.0, 0.0, 0.0, 0.0, 5.0, 0.0), "Delta_CA", _grid(0.25, 4.75, 0.25), (1.5, 2.5), False),
    "fig7": ("Fig7", (0.0, 5.0, 2.5, 0.0, 0.0, 0.0), "Delta_AC", _grid(0.25, 20, 0.25), (2.5,), True),
    "fig8": ("Fig8", (0.0, 0.0, 0.0, 0.0, 5.0, 0.0), "Delta_AC", _grid(0.25, 20, 0.25), (2.5,), True),
    "fig9": ("Fig9", (0.0, 0.0, 0.0, 0.0, 5.0, 0.0), "Delta_CA", _grid(0.25, 4.75, 0.25), (2.5,), True),
}
PRESETS = tuple(v[0] for v in _PRESET_TABLE.values())


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def _perturbative(reg: Regime, E: MatrixElementSet, state) -> Tuple[float, Method]:
    if reg in (Regime.BASELINE, Regime.NON_SELECTIVE, Regime.NON_ORTHOGONAL):
        return negativity_baseline(E), Method.BASELINE
    if reg is Regime.ORTHOGONAL:
        return negativity_orthogonal(tilde_elements(E)), Method.GENERIC
    return transition_closed_form(state.matrix), Method.TRANSITION


def run_scenario(cfg: ScenarioConfig, regimes: Sequence[Regime],
                 rel_tol: float = DEFAULT_REL_TOL,
                 cache: Optional[ElementCache] = None) -> SweepRecord:
    """Elements once, then one state and negativity per requested regime.

    The reported value is the exact (partial-transpose) negativity; the
    perturbative closed form for the regime rides along as the third entry.
    """
    validate_scenario(cfg)
    E = element_set(cfg, rel_tol=rel_tol, cache=cache)
    out: Dict[str, Tuple[float, str, float]] = {}
    for r in regimes:
        r = Regime(r)
        state = assemble_state(cfg, E, r)
        exact = negativity_exact(state)
        pert, _ = _perturbative(r, E, state)
        out[r.value] = (exact.value, exact.method.value, pert)
    if cfg.measurement.kind is MeasurementKind.SELECTIVE:
        prob = outcome_probability(E, cfg.measurement.epsilon)
    else:
        prob = 1.0
    return SweepRecord(float("nan"), out, prob, E.digest())


def _evaluate_point(spec: SweepSpec, value: float, rel_tol: float, cache) -> dict:
    row = {"axis_value": value, "cells": {}, "error": ""}
    try:
        for s in spec.series:
            cfg = apply_axis(apply_series(spec.base, s), spec.axis, value)
            rec = run_scenario(cfg, spec.regimes, rel_tol, cache)
            label = series_label(s)
            for reg, (val, method, pert) in rec.negativity_per_regime.items():
                col = f"{reg}@{label}" if label else reg
                row["cells"][col] = val
                row["cells"][col + "_method"] = method
                row["cells"][col + "_perturbative"] = pert
            pcol = f"prob_outcome@{label}" if label else "prob_outcome"
            row["cells"][pcol] = rec.prob_outcome
    except Exception as exc:  # recorded per row, reported via exit status
        row["error"] = f"{type(exc).__name__}: {exc}"
        log.warning("axis value %s failed: %s", value, exc)
    return row


def sweep(spec: SweepSpec, rel_tol: float = DEFAULT_REL_TOL, jobs: int = 1,
          cache: Optional[ElementCache] = None, order: Optional[Sequence[int]] = None):
    """Evaluate every grid point (concurrently when jobs > 1).

    Rows come back ordered by axis value whatever the evaluation order;
    ``order`` permutes the submission order (used to test independence).
    """
    idx = list(order) if order is not None else list(range(len(spec.grid)))
    results: Dict[int, dict] = {}
    if jobs <= 1:
        for i in idx:
            results[i] = _evaluate_point(spec, spec.grid[i], rel_tol, cache)
    else:
        with cf.ThreadPoolExecutor(max_workers=jobs) as pool:
            futs = {pool.submit(_evaluate_point, spec, spec.grid[i], rel_tol, cache): i for i in idx}
            for fut in cf.as_completed(futs):
                results[futs[fut]] = fut.result()
    return [results[i] for i in range(len(spec.grid))]


def csv_text(rows: List[dict]) -> str:
    cols: List[str] = []
    for r in rows:
        for c in r["cells"]:
            if c not in cols:
                cols.append(c)
    buf = io.StringIO()
    buf.write(",".join(["axis_value"] + cols + ["error"]) + "\n")
    for r in rows:
        vals = [format_float(r["axis_value"])]
        for c in cols:
            v = r["cells"].get(c, "")
            vals.append(v if isinstance(v, str) else format_float(v))
        vals.append(r["error"].replace(",", ";").replace("\n", " "))
        buf.write(",".join(vals) + "\n")
    return buf.getvalue()


def write_csv(rows: List[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(csv_text(rows))


# ---------------------------------------------------------------------------
# Acceptance suite
# ---------------------------------------------------------------------------

@dataclass
class Check:
    criterion: str
    name: str
    measured: float
    bound: str
    passed: bool
    seconds: float = 0.0
    note: str = ""

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        note = f"  [{self.note}]" if self.note else ""
        return (f"[{verdict}] {self.criterion} {self.name}: measured={self.measured:.6g} "
                f"bound {self.bound} ({self.seconds:.2f}s){note}")


def _cfg_for(spec: SweepSpec, s: Dict[str, float], value: float) -> ScenarioConfig:
    return apply_axis(apply_series(spec.base, s), spec.axis, value)


def _neg_pair(cfg: ScenarioConfig, regime: Regime, cache=None):
    """Exact negativity with and without the measurement (N_s, N_wm)."""
    E = element_set(cfg, cache=cache)
    ns = negativity_exact(assemble_state(cfg, E, regime)).value
    nwm = negativity_exact(assemble_state(cfg, E, Regime.BASELINE)).value
    return ns, nwm, E


def _leading_pair(cfg: ScenarioConfig, cache=None):
    """Leading-order (order lambda^2) negativities (N_s orthogonal, N_wm).

    The exact spectrum of a state truncated at second order carries spurious
    O(lambda^4) negative eigenvalues (e.g. -|L_AB|^2 from the gg/ee block);
    statements "in lambda^2 units" concern the lambda^2 coefficient, which
    the closed forms give directly.  Also returns the exact N_s.
    """
    E = element_set(cfg, cache=cache)
    ns = negativity_orthogonal(tilde_elements(E))
    nwm = negativity_baseline(E)
    exact = negativity_exact(assemble_state(cfg, E, Regime.ORTHOGONAL)).value
    return ns, nwm, exact


def residual_suite(lam: float, n: int = 200, seed: int = 12345):
    """Exact-vs-perturbative residuals on seeded random element sets.

    Each set is evaluated as a baseline state, a non-orthogonal state
    (epsilon = 0.5), an orthogonal state at epsilon = lambda^1.5 and a
    transition state at epsilon = lambda.  Also compares the second-order
    root expansions with dense eigenvalues and counts clearly negative
    eigenvalues (below -C lambda^3).
    """
    rng = np.random.default_rng(seed)
    det = DetectorParams(1.0)
    worst = {"baseline": 0.0, "nonorthogonal": 0.0, "orthogonal": 0.0,
             "transition": 0.0, "roots": 0.0}
    max_negative = 0
    thresh = RESIDUAL_CONSTANT * lam**3
    for _ in range(n):
        E = random_element_set(rng, lam)
        xi = rng.uniform(0, 2 * math.pi)

        def cfg(eps):
            return ScenarioConfig(det, det, det, lam, MeasurementSpec("Selective", eps, xi))

        nb = negativity_baseline(E)
        sb = assemble_state(cfg(0.5), E, Regime.BASELINE)
        rb = negativity_exact(sb)
        worst["baseline"] = max(worst["baseline"], abs(rb.value - nb))
        sn = assemble_state(cfg(0.5), E)
        worst["nonorthogonal"] = max(worst["nonorthogonal"], abs(negativity_exact(sn).value - nb))
        so = assemble_state(cfg(lam**1.5), E)
        worst["orthogonal"] = max(
            worst["orthogonal"],
            abs(negativity_exact(so).value - negativity_orthogonal(tilde_elements(E))))
        st = assemble_state(cfg(lam), E)
        worst["transition"] = max(
            worst["transition"], abs(negativity_exact(st).value - transition_closed_form(st.matrix)))
        for s in (sb, sn, so, st):
            ev = pt_eigenvalues(partial_transpose_B(s.matrix))
            max_negative = max(max_negative, int(np.sum(ev < -thresh)))
        m = eq25_matrix(E.L_BB, E.L_AA, E.M_AB, E.L_AB)
        dense = np.sort(pt_eigenvalues(partial_transpose_B(m)))
        roots = np.sort(perturbative_roots(E.L_BB, E.L_AA, E.M_AB, E.L_AB))
        worst["roots"] = max(worst["roots"], float(np.max(np.abs(dense - roots))))
    return worst, max_negative


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


def _c1():
    def go():
        return max(abs(local_L_integral(g, 1.0) / local_L(g, 1.0) - 1) for g in (0, 0.1, 1, 2.5, 5))
    err, dt = _timed(go)
    return [Check("1", "local closed form vs quadrature", err, "<= 1e-08", err <= 1e-8 and dt < 1, dt)]


def _c2():
    def go():
        worst = 0.0
        for g in (1, 2.5, 5):
            for L in (1, 2.5, 5, 10):
                for D in (0, 2.5, 5, 10):
                    geom = GeometryPair(L, D)
                    q = nonlocal_L(g, g, geom, 1.0, rel_tol=1e-11)
                    c = nonlocal_L_closed(g, geom, 1.0)
                    worst = max(worst, abs(c - q) / abs(q))
        return worst
    err, dt = _timed(go)
    return [Check("2", "non-local closed form vs quadrature (48 pts)", err, "<= 1e-07",
                  err <= 1e-7 and dt < 10, dt)]


def _c3():
    def go():
        worst = 0.0
        neg_diff = 0.0
        for fig in PRESETS:
            spec = preset(fig)
            cfg = _cfg_for(spec, spec.series[0], spec.grid[len(spec.grid) // 2])
            E = element_set(cfg)
            ns_cfg = replace(cfg, measurement=MeasurementSpec(MeasurementKind.NON_SELECTIVE))
            b_cfg = replace(cfg, measurement=MeasurementSpec(MeasurementKind.NONE))
            a = assemble_state(ns_cfg, E)
            b = assemble_state(b_cfg, E)
            worst = max(worst, float(np.max(np.abs(a.matrix - b.matrix))))
            neg_diff = max(neg_diff, abs(negativity_exact(a).value - negativity_exact(b).value))
        return worst, neg_diff
    (worst, nd), dt = _timed(go)
    return [Check("3", "non-selective == baseline (entrywise)", worst, "<= 1e-15",
                  worst <= 1e-15 and nd == 0.0 and dt < 5, dt, f"negativity diff {nd:g}")]


def _c4():
    def go():
        spec = preset("Fig2")
        res = {}
        for lam in (0.005, 0.01):
            worst = 0.0
            for eps in (0.3, 0.5, 0.9):
                base = replace(spec.base, coupling=lam,
                               measurement=MeasurementSpec("Selective", eps, 0.7))
                for D in (0.0, 2.0, 5.0, 10.0, 20.0):
                    cfg = _cfg_for(SweepSpec(base, spec.axis, [0.0], spec.regimes), {"gap": 2.5}, D)
                    ns, nwm, _ = _neg_pair(cfg, Regime.NON_ORTHOGONAL)
                    worst = max(worst, abs(ns - nwm))
            res[lam] = worst
        return res
    res, dt = _timed(go)
    checks = []
    ok = all(res[l] <= RESIDUAL_CONSTANT * l**3 for l in res)
    checks.append(Check("4", "non-orthogonal |N_s - N_wm| / (C lambda^3)",
                        max(res[l] / (RESIDUAL_CONSTANT * l**3) for l in res), "<= 1", ok and dt < 30, dt))
    ratio = res[0.01] / res[0.005] if res[0.005] > 0 else float("inf")
    checks.append(Check("4", "residual ratio lambda -> lambda/2", ratio, ">= 6 (cubic or faster)",
                        ratio >= 6, dt))
    return checks


def _orthogonal_figure(fig: str, crit: str, zero_upto: float, extra_zero_at: Optional[float] = None,
                       check_monotone: bool = True, grid=None):
    spec = preset(fig)
    grid = spec.grid if grid is None else grid
    t0 = time.perf_counter()
    lam2 = spec.base.coupling ** 2
    worst_a = -float("inf")
    worst_b = 0.0
    worst_c = 0.0
    truncation = 0.0
    ratios = []
    for s in spec.series:
        ns_list, nwm_list = [], []
        for D in grid:
            ns, nwm, exact = _leading_pair(_cfg_for(spec, s, D))
            truncation = max(truncation, abs(exact - ns) / lam2)
            ns_list.append(ns / lam2)
            nwm_list.append(nwm / lam2)
        ns_arr, nwm_arr = np.array(ns_list), np.array(nwm_list)
        worst_a = max(worst_a, float(np.max(ns_arr - nwm_arr)))
        mask = np.array(grid) <= zero_upto + 1e-12
        worst_b = max(worst_b, float(np.max(ns_arr[mask])) if mask.any() else 0.0)
        pos = np.nonzero(ns_arr > 0)[0]
        if check_monotone and len(pos):
            tail = ns_arr[pos[0]:]
            drops = np.maximum(0.0, tail[:-1] - tail[1:])
            # quadrature noise floor relative to the local scale
            worst_c = max(worst_c, float(np.max(drops / np.maximum(tail[:-1], 1e-300))) if len(drops) else 0.0)
        if nwm_arr[-1] > 0:
            ratios.append((s.get("gap"), ns_arr[-1] / nwm_arr[-1]))
    dt = time.perf_counter() - t0
    out = [
        Check(crit, f"{fig} (a) N_s <= N_wm + 1e-12 (lambda^2 units)", worst_a, "<= 1e-12", worst_a <= 1e-12, dt,
              f"exact-eigen N_s differs by <= {truncation:.1e} (order lambda^2 in these units)"),
        Check(crit, f"{fig} (b) N_s = 0 for Delta <= {zero_upto:g}", worst_b, "<= 1e-12", worst_b <= 1e-12, dt),
    ]
    if check_monotone:
        out.append(Check(crit, f"{fig} (c) N_s non-decreasing after onset (max relative drop)", worst_c,
                         "<= 1e-6", worst_c <= 1e-6, dt))
    if ratios:
        rmin = min(r for _, r in ratios)
        detail = ", ".join(f"gap {g:g}: {r:.4f}" for g, r in ratios)
        out.append(Check(crit, f"{fig} (d) N_s/N_wm at Delta = {grid[-1]:g}", rmin, ">= 0.95",
                         rmin >= 0.95, dt, detail))
    else:
        out.append(Check(crit, f"{fig} (d) N_s/N_wm at Delta = {grid[-1]:g}", float("nan"), ">= 0.95",
                         False, dt, "no gap harvests entanglement at this point"))
    if extra_zero_at is not None:
        pairs = [_leading_pair(_cfg_for(spec, s, extra_zero_at)) for s in spec.series]
        z = max(p[0] for p in pairs) / lam2
        any_harvest = any(p[1] > 0 for p in pairs)
        out.append(Check(crit, f"{fig} N_s = 0 at Delta = {extra_zero_at:g}", z, "<= 1e-12",
                         z <= 1e-12, dt, "" if any_harvest else "N_wm also zero there"))
    return out


def _c5():
    return _orthogonal_figure("Fig2", "5", zero_upto=1.0)


def _c6():
    return _orthogonal_figure("Fig3", "6", zero_upto=1.0, extra_zero_at=0.0)


def _c7():
    return _orthogonal_figure("Fig5", "7", zero_upto=1.0, check_monotone=False)


def _c8():
    def go():
        spec = preset("Fig6like")
        lam2 = spec.base.coupling ** 2
        worst = 0.0
        for s in spec.series:
            for D in spec.grid:
                ns, _, _ = _leading_pair(_cfg_for(spec, s, D))
                worst = max(worst, ns / lam2)
        return worst
    worst, dt = _timed(go)
    return [Check("8", "C between A and B: max N_s (lambda^2 units)", worst, "<= 1e-12",
                  worst <= 1e-12 and dt < 60, dt)]


def _transition_deviation(spec: SweepSpec, s: Dict[str, float], grid):
    rel, absd = [], []
    for D in grid:
        ns, nwm, _ = _neg_pair(_cfg_for(spec, s, D), Regime.TRANSITION)
        rel.append((ns - nwm) / nwm)
        absd.append(ns - nwm)
    return np.array(rel), np.array(absd)


def _first_lobe_sign(dev: np.ndarray) -> float:
    i = int(np.argmax(np.abs(dev) > 0.05 * np.max(np.abs(dev))))
    return float(np.sign(dev[i]))


def _c9():
    t0 = time.perf_counter()
    spec = preset("Fig7")
    devs = {s["xi"]: _transition_deviation(spec, s, spec.grid)[0] for s in spec.series}
    dt = time.perf_counter() - t0
    worst = max(float(np.max(np.abs(d))) for d in devs.values())
    at20 = max(abs(float(d[-1])) for d in devs.values())
    xs = sorted(devs)
    # sign of first-lobe deviation for xi and xi + pi
    flips_pi = all(_first_lobe_sign(devs[x]) == -_first_lobe_sign(devs[(x + math.pi) % (2 * math.pi)])
                   for x in xs if (x + math.pi) % (2 * math.pi) in devs)
    flips_half = all(_first_lobe_sign(devs[x]) == -_first_lobe_sign(devs[(x + math.pi / 2) % (2 * math.pi)])
                     for x in xs)
    max_pi_diff = max(float(np.max(np.abs(devs[x] - devs[(x + math.pi) % (2 * math.pi)]))) for x in xs)
    osc = all(np.any(np.diff(np.sign(d[np.abs(d) > 1e-12])) != 0) for d in devs.values())
    return [
        Check("9", "Fig7 max |N_s - N_wm| / N_wm", worst, "<= 1e-3", worst <= 1e-3 and dt < 180, dt),
        Check("9", "Fig7 deviations oscillate in Delta_AC", float(osc), "== 1", osc, dt),
        Check("9", "Fig7 first-lobe sign flips between xi and xi + pi", float(flips_pi), "== 1", flips_pi, dt,
              f"max |dev(xi) - dev(xi+pi)| = {max_pi_diff:.2e}"),
        Check("9", "Fig7 first-lobe sign flips between xi and xi + pi/2", float(flips_half), "== 1",
              flips_half, dt, "supplementary"),
        Check("9", "Fig7 relative deviation at Delta_AC = 20", at20, "<= 1e-4", at20 <= 1e-4, dt),
    ]


def _c10():
    t0 = time.perf_counter()
    spec = preset("Fig7")
    base = spec.base
    far = replace(base,
                  detB=replace(base.detB, position=(10.0, 0.0, 0.0)),
                  detC=replace(base.detC, position=(5.0, 0.0, 0.0)))
    fspec = SweepSpec(far, spec.axis, spec.grid, spec.regimes, [{"gap": 5.0, "xi": x} for x in XI_SERIES])
    worst = 0.0
    for s in fspec.series:
        rel, _ = _transition_deviation(fspec, s, fspec.grid)
        worst = max(worst, float(np.max(np.abs(rel))))
    dt = time.perf_counter() - t0
    return [Check("10", "far geometry (L = 5 pairs, gap 5) max relative deviation", worst, "<= 1e-6",
                  worst <= 1e-6 and dt < 180, dt)]


def _c11():
    t0 = time.perf_counter()
    spec = preset("Fig9")
    grid = np.array(spec.grid)
    env = np.zeros(len(grid))
    per_xi = {}
    for s in spec.series:
        _, absd = _transition_deviation(spec, s, spec.grid)
        env = np.maximum(env, np.abs(absd))
        per_xi[s["xi"]] = float(grid[int(np.argmax(np.abs(absd)))])
    dt = time.perf_counter() - t0
    arg = float(grid[int(np.argmax(env))])
    detail = "argmax per xi: " + ", ".join(f"{x:.3f}->{a:g}" for x, a in per_xi.items())
    return [Check("11", "Fig9 argmax of |N_s - N_wm| over Delta_CA", arg, "== 2.5",
                  abs(arg - 2.5) < 1e-9 and dt < 60, dt, detail)]


def _c12():
    t0 = time.perf_counter()
    res = {lam: residual_suite(lam) for lam in (0.005, 0.01, 0.02)}
    dt = time.perf_counter() - t0
    out = []
    worst_scaled = max(max(w[k] for k in w if k != "roots") / (RESIDUAL_CONSTANT * lam**3)
                       for lam, (w, _) in res.items())
    out.append(Check("12", "max |N_exact - N_pert| / (C lambda^3)", worst_scaled, "<= 1",
                     worst_scaled <= 1 and dt < 30, dt))
    roots_scaled = max(w["roots"] / (RESIDUAL_CONSTANT * lam**3) for lam, (w, _) in res.items())
    out.append(Check("12", "root expansions vs dense eigenvalues / (C lambda^3)", roots_scaled, "<= 1",
                     roots_scaled <= 1, dt))
    nneg = max(n for _, n in res.values())
    out.append(Check("12", "negative eigenvalues beyond -C lambda^3 per partial transpose", nneg, "<= 1",
                     nneg <= 1, dt))
    w1 = max(v for k, v in res[0.01][0].items() if k != "roots")
    w2 = max(v for k, v in res[0.005][0].items() if k != "roots")
    out.append(Check("12", "residual ratio lambda -> lambda/2", w1 / w2, ">= 6 (cubic or faster)",
                     w1 / w2 >= 6, dt))
    return out


def _c13():
    import mpmath as mp

    def go():
        mp.mp.dps = 40
        rng = np.random.default_rng(2024)
        worst_w = worst_erf = worst_erfi = 0.0
        # w: |z| <= 30, kept where the value is representable
        zs = []
        while len(zs) < 1000:
            r = 30 * math.sqrt(rng.random())
            th = rng.uniform(-math.pi, math.pi)
            z = complex(r * math.cos(th), r * math.sin(th))
            if z.imag < 0 and z.imag**2 - z.real**2 > 600:
                continue
            zs.append(z)
        w = faddeeva(np.array(zs))
        for z, val in zip(zs, w):
            ref = mp.exp(-mp.mpc(z) ** 2) * mp.erfc(-1j * mp.mpc(z))
            worst_w = max(worst_w, float(abs(val - complex(ref)) / abs(ref)))
        zs = [complex(*rng.uniform(-25 / math.sqrt(2), 25 / math.sqrt(2), 2)) for _ in range(1000)]
        vals = erf_complex(np.array(zs))
        ivals = erfi_complex(np.array(zs))
        for z, v, iv in zip(zs, vals, ivals):
            ref = complex(mp.erf(mp.mpc(z)))
            worst_erf = max(worst_erf, abs(v - ref) / abs(ref))
            iref = complex(mp.erfi(mp.mpc(z)))
            worst_erfi = max(worst_erfi, abs(iv - iref) / abs(iref))
        e25 = abs(erfc_real(2.5) / float(mp.erfc(2.5)) - 1)
        e1 = abs(float(erf_complex(1.0).real) / float(mp.erf(1)) - 1)
        return worst_w, worst_erf, worst_erfi, e25, e1
    (ww, we, wi, e25, e1), dt = _timed(go)
    return [
        Check("13", "Faddeeva max relative error (1000 pts)", ww, "<= 1e-10", ww <= 1e-10, dt),
        Check("13", "erf max relative error (1000 pts)", we, "<= 1e-9", we <= 1e-9, dt),
        Check("13", "erfi max relative error (1000 pts)", wi, "<= 1e-9", wi <= 1e-9, dt),
        Check("13", "erfc(2.5) relative error", e25, "<= 1e-12", e25 <= 1e-12, dt),
        Check("13", "erf(1) relative error", e1, "<= 1e-9", e1 <= 1e-9 and dt < 5, dt),
    ]


def _c14():
    def go():
        spec = preset("Fig7")
        spec.grid = spec.grid[:6]
        a = csv_text(sweep(spec, jobs=2, cache=ElementCache()))
        b = csv_text(sweep(spec, jobs=1, cache=ElementCache(), order=list(reversed(range(6)))))
        return a == b
    same, dt = _timed(go)
    return [Check("14", "sweep CSV byte-identical on rerun", float(same), "== 1", same, dt)]


def _fault_injection():
    """With a sign-flipped gamma block the confinement check must fail."""
    def confinement_ok():
        spec = preset("Fig2")
        cfg = _cfg_for(spec, {"gap": 2.5}, 1.0).with_measurement(epsilon=0.5, xi=0.3)
        E = element_set(cfg)
        st = assemble_state(cfg, E, Regime.NON_ORTHOGONAL).matrix
        eps, xi = 0.5, 0.3
        c = math.sqrt(1 - eps**2) / eps * (1 - E.L_CC / eps**2)
        expect = c * (np.exp(1j * xi) * E.L_AC + np.exp(-1j * xi) * E.M_AC)
        return abs(st[2, 0] - expect) <= 1e-12 * abs(expect)

    def identity_ok():
        return all(c.passed for c in _c3())

    clean = confinement_ok()
    with fault_injection(-1.0):
        bugged_conf = confinement_ok()
        bugged_ident = identity_ok()
    ok = clean and not bugged_conf and bugged_ident
    return [Check("fault", "flipped gamma: identity passes, confinement fails", float(ok), "== 1", ok)]


SUITES: Dict[str, Callable[[], List[Check]]] = {
    "local-closed-form": _c1,
    "nonlocal-closed-form": _c2,
    "nonselective-identity": _c3,
    "nonorthogonal-invariance": _c4,
    "orthogonal-fig2": _c5,
    "orthogonal-fig3": _c6,
    "orthogonal-fig5": _c7,
    "c-between": _c8,
    "transition-fig7": _c9,
    "transition-far": _c10,
    "transition-fig9": _c11,
    "perturbative-vs-exact": _c12,
    "special-functions": _c13,
    "determinism": _c14,
    "fault-injection": _fault_injection,
}


def acceptance(suite_id: Optional[str] = None, stream=None) -> List[Check]:
    """Run one suite (or all) and print a line per check."""
    stream = stream if stream is not None else sys.stdout
    names = list(SUITES) if suite_id in (None, "all") else [suite_id]
    checks: List[Check] = []
    for n in names:
        if n not in SUITES:
            raise ValueError(f"unknown suite {n!r}; choose from {list(SUITES)}")
        for c in SUITES[n]():
            print(c.line(), file=stream)
            checks.append(c)
    return checks


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------

def _load_spec(arg: str, lam: Optional[float]) -> SweepSpec:
    p = Path(arg)
    if p.exists():
        with open(p) as fh:
            doc = json.load(fh)
        if lam is not None:
            doc["coupling"] = lam
        spec = SweepSpec.from_dict(doc)
        if lam is not None and "preset" not in doc:
            spec.base = replace(spec.base, coupling=lam)
        return spec
    return preset(arg, lam=lam if lam is not None else DEFAULT_LAMBDA)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="harvestctl", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", help="output path")
        p.add_argument("--rel-tol", type=float, default=DEFAULT_REL_TOL, help="quadrature tolerance")
        p.add_argument("--lambda", dest="lam", type=float, default=None, help="coupling strength")
        p.add_argument("--jobs", type=int, default=1, help="worker threads")

    p = sub.add_parser("preset", help="write a figure preset as a sweep spec (JSON)")
    p.add_argument("fig", choices=PRESETS)
    common(p)

    p = sub.add_parser("run", help="evaluate one scenario file")
    p.add_argument("scenario")
    p.add_argument("--regimes", default=None, help="comma-separated regimes (default: scenario's own + Baseline)")
    p.add_argument("--dump-state", action="store_true", help="print the 4x4 state matrices")
    common(p)

    p = sub.add_parser("sweep", help="run a sweep spec file or preset name, write CSV")
    p.add_argument("spec")
    common(p)

    p = sub.add_parser("accept", help="run the acceptance suite")
    p.add_argument("suite", nargs="?", default=None, choices=list(SUITES) + ["all"])
    common(p)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    if args.command == "preset":
        spec = preset(args.fig, lam=args.lam if args.lam is not None else DEFAULT_LAMBDA)
        text = json.dumps(spec.to_dict(), indent=2, sort_keys=True) + "\n"
        if args.out:
            Path(args.out).write_text(text)
        else:
            sys.stdout.write(text)
        return 0

    if args.command == "run":
        with open(args.scenario) as fh:
            cfg = scenario_from_dict(json.load(fh))
        if args.lam is not None:
            cfg = replace(cfg, coupling=args.lam)
        from .protocol import effective_regime

        if args.regimes:
            regimes = [Regime(r.strip()) for r in args.regimes.split(",")]
        else:
            regimes = list(dict.fromkeys([Regime.BASELINE, effective_regime(cfg)]))
        rec = run_scenario(cfg, regimes, rel_tol=args.rel_tol)
        out = {
            "negativity": {k: {"value": v[0], "method": v[1], "perturbative": v[2],
                               "value_over_lambda2": v[0] / cfg.coupling**2}
                           for k, v in rec.negativity_per_regime.items()},
            "prob_outcome": rec.prob_outcome,
            "element_digest": rec.element_snapshot,
        }
        if args.dump_state:
            E = element_set(cfg, rel_tol=args.rel_tol)
            out["states"] = {r.value: assemble_state(cfg, E, r).to_text() for r in regimes}
        text = json.dumps(out, indent=2, sort_keys=True) + "\n"
        if args.out:
            Path(args.out).write_text(text)
        else:
            sys.stdout.write(text)
        return 0

    if args.command == "sweep":
        spec = _load_spec(args.spec, args.lam)
        rows = sweep(spec, rel_tol=args.rel_tol, jobs=args.jobs)
        out = args.out or spec.output_path
        if out:
            write_csv(rows, out)
        else:
            sys.stdout.write(csv_text(rows))
        failed = sum(1 for r in rows if r["error"])
        if failed:
            log.error("%d of %d rows failed", failed, len(rows))
        return 1 if failed else 0

    if args.command == "accept":
        stream = open(args.out, "w") if args.out else sys.stdout
        try:
            checks = acceptance(args.suite, stream)
        finally:
            if args.out:
                stream.close()
        passed = sum(c.passed for c in checks)
        print(f"{passed}/{len(checks)} checks passed")
        return 0 if passed == len(checks) else 1
    return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
