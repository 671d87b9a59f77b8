import math

import numpy as np
import pytest

from harvestlab.matrix_elements import ElementCache, MatrixElementSet, element_set, random_element_set
from harvestlab.protocol import DetectorParams, MeasurementSpec, Regime, ScenarioConfig
from harvestlab.states import (
    EE,
    EG,
    GE,
    GG,
    DegenerateMeasurement,
    InconsistentRegime,
    assemble_state,
    fault_injection,
    gamma_block,
    matrix_from_text,
    matrix_to_text,
    nu_block,
    outcome_probability,
    primed_elements,
    rho0_block,
    rho2_block,
    tilde_elements,
)

LAM = 0.01


def fig2(delta_ac=1.5, eps=0.0, xi=0.0, kind="Selective", lam=LAM, override=None):
    return ScenarioConfig(
        DetectorParams(2.5, (0, 0, 0), 0.0),
        DetectorParams(2.5, (5, 0, 0), 0.0),
        DetectorParams(2.5, (2.5, 0, 0), -delta_ac),
        coupling=lam, measurement=MeasurementSpec(kind, eps, xi), regime_override=override,
    )


def E_fig2(delta_ac=1.5):
    return element_set(fig2(delta_ac), cache=ElementCache())


@pytest.fixture(scope="module")
def rand_sets():
    rng = np.random.default_rng(99)
    return [random_element_set(rng, LAM) for _ in range(100)]


def test_rho2_zero_and_traceless(rand_sets):
    assert np.all(rho2_block(MatrixElementSet.zeros()) == 0)
    for E in rand_sets[:10]:
        assert abs(np.trace(rho2_block(E))) <= 1e-15 * (E.L_AA + E.L_BB)


def test_rho2_layout():
    E = E_fig2()
    m = rho2_block(E)
    assert m[EE, GG] == E.M_AB and m[GG, EE] == np.conj(E.M_AB)
    assert m[EG, GE] == E.L_AB
    assert m[GE, GE] == E.L_BB and m[EG, EG] == E.L_AA and m[EE, EE] == 0


def test_gamma_vanishes_at_endpoints():
    E = E_fig2()
    assert np.all(gamma_block(E, 0.0, 0.3) == 0)
    assert np.allclose(gamma_block(E, 1.0, 0.3), 0, atol=0)


def test_gamma_hermitian_traceless_and_placement(rand_sets):
    for E in rand_sets[:10]:
        g = gamma_block(E, 0.4, 1.1)
        assert np.max(np.abs(g - g.conj().T)) == 0
        assert np.trace(g) == 0
        # only the (single excitation, gg) entries and their conjugates
        mask = np.ones((4, 4), bool)
        for i, j in [(EG, GG), (GG, EG), (GE, GG), (GG, GE)]:
            mask[i, j] = False
        assert np.all(g[mask] == 0)
        c = 0.4 * math.sqrt(1 - 0.16)
        assert g[EG, GG] == pytest.approx(c * (np.exp(1.1j) * E.L_AC + np.exp(-1.1j) * E.M_AC), rel=1e-14)
        assert g[GE, GG] == pytest.approx(c * (np.exp(1.1j) * E.L_BC + np.exp(-1.1j) * E.M_BC), rel=1e-14)


def test_gamma_xi_plus_pi_flips_relative_sign():
    E = E_fig2()
    c = 0.3 * math.sqrt(1 - 0.09)
    a = gamma_block(E, 0.3, 0.2)[EG, GG] / c
    b = gamma_block(E, 0.3, 0.2 + math.pi)[EG, GG] / c
    # e^{i(xi+pi)} = -e^{i xi}: both parts flip, so the L part relative to the M part is unchanged
    # while the M_AC part flips sign relative to a fixed L_AC reference phase.
    lpart = np.exp(0.2j) * E.L_AC
    assert b == pytest.approx(-a, rel=1e-12)
    assert (a - lpart) == pytest.approx(np.exp(-0.2j) * E.M_AC, rel=1e-10)
    assert (b + lpart) == pytest.approx(-(a - lpart), rel=1e-10)


def test_tilde_reduce_to_plain_without_C():
    E = E_fig2().replace(L_AC=0j, M_AC=0j, L_BC=0j, M_BC=0j)
    t = tilde_elements(E)
    assert (t.Lt_AA, t.Lt_BB, t.Lt_AB, t.Mt_AB) == (E.L_AA, E.L_BB, E.L_AB, E.M_AB)
    assert np.allclose(nu_block(E), E.L_CC * rho2_block(E), rtol=0, atol=1e-30)


def test_tilde_added_noise(rand_sets):
    for E in rand_sets:
        t = tilde_elements(E)
        assert t.Lt_AA - E.L_AA == pytest.approx((abs(E.L_AC) ** 2 + abs(E.M_AC) ** 2) / E.L_CC, rel=1e-12)
        assert t.Lt_AA >= E.L_AA and t.Lt_BB >= E.L_BB


def test_tilde_symmetric_geometry():
    t = tilde_elements(E_fig2())
    assert t.Lt_AA == t.Lt_BB


def test_nu_trace_and_fig2_entry(rand_sets):
    for E in rand_sets[:10]:
        assert abs(np.trace(nu_block(E))) < 1e-22
    E = E_fig2()
    n = nu_block(E)
    assert n[GE, GE].real >= E.L_CC * E.L_BB


def test_degenerate_measurement():
    E = E_fig2().replace(L_CC=0.0)
    with pytest.raises(DegenerateMeasurement):
        tilde_elements(E)
    with pytest.raises(DegenerateMeasurement):
        nu_block(E)
    with pytest.raises(DegenerateMeasurement):
        primed_elements(E, 0.0, 0.0)


def test_primed_limits():
    E = E_fig2()
    p = primed_elements(E, 0.0, 0.5)
    t = tilde_elements(E)
    assert p.Lp_A == 0 and p.Lp_B == 0
    assert p.Lp_AA == pytest.approx(t.Lt_AA, rel=1e-14)
    assert p.Mp_AB == pytest.approx(t.Mt_AB, rel=1e-14)
    big = primed_elements(E, 0.9, 0.5)
    bound = (abs(E.L_AC) * abs(E.L_BC) + abs(E.M_AC) * abs(E.M_BC)) / 0.81
    assert abs(big.Lp_AB - E.L_AB) <= bound * (1 + 1e-6)  # equality for aligned C kernels


def test_primed_symmetric_fig7():
    E = element_set(fig2(3.0, eps=LAM), cache=ElementCache())
    p = primed_elements(E, LAM, 0.0)
    assert p.Lp_A == p.Lp_B


def test_nonselective_equals_baseline():
    E = E_fig2()
    a = assemble_state(fig2(kind="NonSelective"), E)
    b = assemble_state(fig2(kind="None"), E)
    assert a.regime is Regime.NON_SELECTIVE and b.regime is Regime.BASELINE
    assert np.max(np.abs(a.matrix - b.matrix)) <= 1e-15


@pytest.mark.parametrize("eps, regime", [(0.5, Regime.NON_ORTHOGONAL), (0.0, Regime.ORTHOGONAL),
                                         (LAM, Regime.TRANSITION)])
def test_states_hermitian_unit_trace(rand_sets, eps, regime):
    det = DetectorParams(1.0)
    for E in rand_sets:
        cfg = ScenarioConfig(det, det, det, LAM, MeasurementSpec("Selective", eps, 0.7))
        s = assemble_state(cfg, E)
        assert s.regime is regime
        assert s.hermiticity_error() <= 1e-12
        assert s.trace_error() <= 1e-15
        assert s.min_eigenvalue() >= -6.1 * LAM**3


def test_orthogonal_layout_fig2():
    E = E_fig2()
    s = assemble_state(fig2(), E).matrix
    t = tilde_elements(E)
    assert s[GE, GE].real == pytest.approx(t.Lt_BB, rel=1e-14)
    assert s[EG, EG].real == pytest.approx(t.Lt_AA, rel=1e-14)
    assert s[GE, GE] == s[EG, EG]
    assert s[EE, GG] == pytest.approx(t.Mt_AB, rel=1e-14)


def test_transition_first_order_entries():
    E = E_fig2()
    s = assemble_state(fig2(eps=LAM, xi=0.4), E).matrix
    p = primed_elements(E, LAM, 0.4)
    # the assembled entry keeps the sqrt(1 - eps^2) of the gamma block
    root = math.sqrt(1 - LAM**2)
    assert s[EG, GG] == pytest.approx(root * p.Lp_A, rel=1e-12)
    assert s[GE, GG] == pytest.approx(root * p.Lp_B, rel=1e-12)
    # order lambda: entries shrink linearly as lambda (and eps = lambda) halves
    half = element_set(fig2(lam=LAM / 2), cache=ElementCache())
    s2 = assemble_state(fig2(eps=LAM / 2, xi=0.4, lam=LAM / 2), half).matrix
    expect = 0.5 * math.sqrt(1 - LAM**2 / 4) / root
    assert abs(s2[EG, GG]) / abs(s[EG, GG]) == pytest.approx(expect, rel=1e-12)


def test_nonorthogonal_gamma_confinement():
    E = E_fig2()
    for xi in (0.0, 1.0):
        s1 = assemble_state(fig2(eps=0.3, xi=xi), E).matrix
        s2 = assemble_state(fig2(eps=0.6, xi=xi), E).matrix
        base = assemble_state(fig2(kind="None"), E).matrix
        diff1, diff2 = s1 - base, s2 - base
        mask = np.ones((4, 4), bool)
        for i, j in [(EG, GG), (GG, EG), (GE, GG), (GG, GE)]:
            mask[i, j] = False
        assert np.all(diff1[mask] == 0) and np.all(diff2[mask] == 0)

        def expected(eps):
            return math.sqrt(1 - eps**2) / eps * (1 - E.L_CC / eps**2)

        ratio = diff2[EG, GG] / diff1[EG, GG]
        assert ratio == pytest.approx(expected(0.6) / expected(0.3), rel=1e-12)
        # leading 1/eps scaling (sqrt(1-eps^2) and L_CC corrections aside)
        assert abs(ratio) == pytest.approx(0.5 * math.sqrt(1 - 0.36) / math.sqrt(1 - 0.09), rel=1e-6)


def test_transition_approaches_orthogonal():
    E = E_fig2()
    eps = LAM**1.5 * 1.0001
    tr = assemble_state(fig2(eps=eps, override="Transition"), E).matrix
    orth = assemble_state(fig2(eps=eps, override="Orthogonal"), E).matrix
    for i, j in [(GE, GE), (EG, EG), (EE, GG)]:
        assert abs(tr[i, j] - orth[i, j]) <= 6.1 * LAM**3


def test_inconsistent_regime():
    E = E_fig2()
    with pytest.raises(InconsistentRegime):
        assemble_state(fig2(eps=0.5), E, Regime.ORTHOGONAL)
    s = assemble_state(fig2(eps=0.5, override="Orthogonal"), E, Regime.ORTHOGONAL)
    assert s.regime is Regime.ORTHOGONAL
    # Baseline is always available for comparison
    assert assemble_state(fig2(eps=0.5), E, Regime.BASELINE).regime is Regime.BASELINE


def test_fault_injection_is_scoped():
    E = E_fig2()
    g = gamma_block(E, 0.5, 0.0)
    with fault_injection():
        assert np.array_equal(gamma_block(E, 0.5, 0.0), -g)
    assert np.array_equal(gamma_block(E, 0.5, 0.0), g)


def test_outcome_probability():
    E = E_fig2()
    assert outcome_probability(E, 1.0) == pytest.approx(1 - E.L_CC, rel=1e-15)
    assert outcome_probability(E, 0.0) == E.L_CC
    eps = 0.37
    total = outcome_probability(E, eps) + outcome_probability(E, math.sqrt(1 - eps * eps))
    assert total == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(ValueError):
        outcome_probability(E, 1.5)


def test_text_round_trip():
    s = assemble_state(fig2(eps=LAM, xi=1.0), E_fig2())
    text = s.to_text()
    assert len(text.strip().splitlines()) == 4
    assert np.array_equal(matrix_from_text(text), s.matrix)
    assert np.array_equal(matrix_from_text(matrix_to_text(rho0_block())), rho0_block())
