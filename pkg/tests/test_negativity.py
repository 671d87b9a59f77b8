import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from harvestlab.matrix_elements import ElementCache, element_set, random_element_set
from harvestlab.negativity import (
    RESIDUAL_CONSTANT,
    Method,
    NegativityResult,
    eq25_matrix,
    negativity_baseline,
    negativity_exact,
    negativity_orthogonal,
    negativity_perturbative,
    negativity_transition,
    partial_transpose_B,
    perturbative_roots,
    pt_eigenvalues,
    transition_closed_form,
    transition_closed_form_printed,
)
from harvestlab.protocol import DetectorParams, MeasurementSpec, Regime, ScenarioConfig
from harvestlab.states import EE, EG, GE, GG, assemble_state, rho0_block, tilde_elements

C = RESIDUAL_CONSTANT


def fig2(delta_ac, eps=0.0, xi=0.0, lam=0.01, kind="Selective"):
    return ScenarioConfig(
        DetectorParams(2.5, (0, 0, 0), 0.0),
        DetectorParams(2.5, (5, 0, 0), 0.0),
        DetectorParams(2.5, (2.5, 0, 0), -delta_ac),
        coupling=lam, measurement=MeasurementSpec(kind, eps, xi),
    )


def bell():
    v = np.zeros(4, complex)
    v[GG] = v[EE] = 1 / math.sqrt(2)
    return np.outer(v, v.conj())


# --- partial transpose -----------------------------------------------------

def test_pt_identity():
    assert np.array_equal(partial_transpose_B(np.eye(4) / 4), np.eye(4) / 4)


def test_pt_moves_coherences():
    m = eq25_matrix(0.1, 0.2, 0.05 + 0.01j, 0.03 - 0.02j)
    p = partial_transpose_B(m)
    # (ee, gg) <-> (eg, ge) families swap
    assert p[EG, GE] == m[EE, GG]
    assert p[EE, GG] == m[EG, GE]
    assert np.array_equal(np.diag(p), np.diag(m))


def test_pt_involution_and_hermitian():
    rng = np.random.default_rng(0)
    for _ in range(20):
        a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        h = a + a.conj().T
        p = partial_transpose_B(h)
        assert np.array_equal(partial_transpose_B(p), h)
        assert np.allclose(p, p.conj().T, atol=0)


def test_pt_rejects_non_hermitian():
    m = np.zeros((4, 4), complex)
    m[0, 1] = 1.0
    with pytest.raises(ValueError):
        partial_transpose_B(m)


# --- exact -----------------------------------------------------------------

def test_product_state():
    r = negativity_exact(rho0_block())
    assert r.value == 0 and r.method is Method.EXACT


def test_bell_state():
    r = negativity_exact(bell())
    assert r.value == pytest.approx(0.5, abs=1e-15)
    assert r.value == pytest.approx(sum(max(0.0, -x) for x in r.eigenvalues), abs=1e-12)


def test_result_rejects_negative():
    with pytest.raises(ValueError):
        NegativityResult(-1e-3, Method.EXACT)


def test_deflated_eigenvalues_match_extended_precision():
    import mpmath as mp

    rng = np.random.default_rng(5)
    for _ in range(10):
        E = random_element_set(rng, 0.01)
        P = partial_transpose_B(eq25_matrix(E.L_BB, E.L_AA, E.M_AB, E.L_AB))
        ours = pt_eigenvalues(P)
        mp.mp.dps = 40
        ref = sorted(float(mp.re(x)) for x in mp.eighe(mp.matrix(P.tolist()))[0])
        for a, b in zip(ours, ref):
            assert abs(a - b) <= 1e-13 * abs(b) + 1e-24


def test_baseline_exact_vs_perturbative_fig2():
    E = element_set(fig2(15.0), cache=ElementCache())
    s = assemble_state(fig2(15.0, kind="None"), E)
    assert negativity_baseline(E) > 0
    assert abs(negativity_exact(s).value - negativity_baseline(E)) <= C * 0.01**3


# --- closed forms ------------------------------------------------------------

def test_perturbative_collapse():
    assert negativity_perturbative(0.0, 0.0, 0.3 + 0.4j, 0.1) == pytest.approx(0.01 * 0.5)
    assert negativity_perturbative(0.2, 0.2, 0.15, 0.1) == 0.0
    with pytest.raises(ValueError):
        negativity_perturbative(-0.1, 0.0, 0.1, 0.1)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 2), st.floats(0, 2), st.floats(0, 2), st.floats(0, 2 * math.pi))
def test_perturbative_vs_exact_eq25(r22, r33, m, phi):
    lam = 0.01
    r41 = m * np.exp(1j * phi)
    exact = negativity_exact(eq25_matrix(lam**2 * r22, lam**2 * r33, lam**2 * r41)).value
    assert abs(exact - negativity_perturbative(r22, r33, r41, lam)) <= C * lam**3


def test_baseline_examples():
    E = element_set(fig2(15.0), cache=ElementCache())
    assert negativity_baseline(E.replace(M_AB=0j)) == 0.0
    L = E.L_AA
    assert negativity_baseline(E) == pytest.approx(max(0.0, abs(E.M_AB) - L), rel=1e-12)


def test_orthogonal_examples():
    E = element_set(fig2(0.5), cache=ElementCache())
    assert negativity_orthogonal(tilde_elements(E)) == 0.0
    plain = E.replace(L_AC=0j, M_AC=0j, L_BC=0j, M_BC=0j)
    assert negativity_orthogonal(tilde_elements(plain)) == negativity_baseline(plain)
    sym = tilde_elements(element_set(fig2(12.0), cache=ElementCache()))
    assert sym.Lt_AA == sym.Lt_BB
    assert negativity_orthogonal(sym) == pytest.approx(max(0.0, abs(sym.Mt_AB) - sym.Lt_AA), rel=1e-12)


def test_orthogonal_below_baseline_fig2():
    for d in np.arange(0, 20.25, 0.25):
        E = element_set(fig2(d), cache=ElementCache())
        assert negativity_orthogonal(tilde_elements(E)) <= negativity_baseline(E)


def test_transition_closed_form_reduces_without_first_order_entries():
    m = eq25_matrix(1e-4, 2e-4, 3e-4 + 1e-4j, 5e-5)
    expect = negativity_perturbative(1e-4, 2e-4, 3e-4 + 1e-4j, 1.0)
    assert transition_closed_form(m) == pytest.approx(expect, rel=1e-12)
    # the printed radicand lacks the 4|M'|^2 term and collapses to zero here
    assert transition_closed_form_printed(m) == 0.0


def test_transition_fig7_point():
    cfg = fig2(10.0, eps=0.01)
    E = element_set(cfg, cache=ElementCache())
    r = negativity_transition(assemble_state(cfg, E), tolerance=C * 0.01**3)
    nb = negativity_baseline(E)
    assert abs(r.value - nb) / nb <= 1e-3
    assert r.meta["closed_form_discrepancy"] is False
    assert r.method is Method.EXACT


def test_transition_residual_order():
    """Exact vs corrected closed form on random transition states; shrinks as lambda^4."""
    res = {}
    for lam in (0.01, 0.005):
        rng = np.random.default_rng(11)
        worst = 0.0
        det = DetectorParams(1.0)
        for _ in range(50):
            E = random_element_set(rng, lam)
            cfg = ScenarioConfig(det, det, det, lam, MeasurementSpec("Selective", lam, rng.uniform(0, 6)))
            s = assemble_state(cfg, E)
            worst = max(worst, abs(negativity_exact(s).value - transition_closed_form(s.matrix)))
        res[lam] = worst
        assert worst <= C * lam**3
    assert res[0.01] / res[0.005] >= 6


# --- perturbative roots ------------------------------------------------

def test_roots_examples():
    r = 0.01
    # partial transpose is diag(1 - 2r, r, r, 0): the two small roots coincide
    assert perturbative_roots(r, r, 0.0) == pytest.approx([1 - 2 * r, 0, r, r])
    dense = pt_eigenvalues(partial_transpose_B(eq25_matrix(r, r, 0.0)))
    assert sorted(dense) == pytest.approx(sorted([1 - 2 * r, 0, r, r]), abs=1e-15)
    assert perturbative_roots(0, 0, 0) == [1, 0, 0, 0]


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 2), st.floats(0, 2), st.floats(0, 2), st.floats(0, 2),
       st.floats(0, 2 * math.pi), st.sampled_from([0.005, 0.01, 0.02]))
def test_roots_vs_dense(r22, r33, m, l32, phi, lam):
    l2 = lam * lam
    # keep |r32|^2 <= r22 r33 as for physical element sets
    r32 = math.sqrt(r22 * r33) * min(l32, 1.0) * np.exp(-1j * phi) * l2
    args = (l2 * r22, l2 * r33, l2 * m * np.exp(1j * phi), r32)
    dense = np.sort(pt_eigenvalues(partial_transpose_B(eq25_matrix(*args))))
    roots = np.sort(perturbative_roots(*args))
    assert np.max(np.abs(dense - roots)) <= C * lam**3
    assert sum(roots) == pytest.approx(1.0, abs=1e-12)
    assert roots[-1] > 0  # x1 = 1 - r22 - r33
    assert np.sum(dense < -C * lam**3) <= 1


def test_at_most_one_negative_without_exchange():
    rng = np.random.default_rng(4)
    for _ in range(100):
        E = random_element_set(rng, 0.01)
        ev = pt_eigenvalues(partial_transpose_B(eq25_matrix(E.L_BB, E.L_AA, E.M_AB)))
        assert np.sum(ev < 0) <= 1
