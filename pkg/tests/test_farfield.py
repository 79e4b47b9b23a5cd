import numpy as np
import pytest
from scipy.optimize import brentq

from wallflow.farfield import D_eval, G_eval, solve_triple, verify_triple
from wallflow.gas import GasLaw
from wallflow.upstream import UpstreamProfile, truncate


@pytest.fixture(scope="module")
def const_tp(gas2):
    return truncate(UpstreamProfile.constant(1.0), 5.0, 10.0)


def closed_form_G(rho):
    # constant profile, gamma = 2, rho0 = 5, ubar = 1, L = 10
    return 50.0 / (rho * np.sqrt(21.0 - 4.0 * rho))


def test_D_values(gas2, const_tp):
    assert D_eval(gas2, const_tp, 5.0, 3.0) == pytest.approx(1.0)       # rho = rho0
    assert D_eval(gas2, const_tp, 4.0, 0.0) == pytest.approx(5.0)       # 2(10-8)+1
    assert D_eval(gas2, const_tp, 4.933, 2.0) == pytest.approx(21.0 - 4.0 * 4.933)


def test_G_closed_form(gas2, const_tp):
    g_val, _ = G_eval(gas2, const_tp, 3.5)
    assert g_val == pytest.approx(closed_form_G(3.5), rel=1e-12)
    assert G_eval(gas2, const_tp, 5.0)[0] == pytest.approx(10.0, rel=1e-12)  # G(rho0) = L


def test_G_monotone_on_bracket(gas2, const_tp):
    rhos = np.linspace(3.6, 4.95, 12)
    for rho in rhos:
        _, gp = G_eval(gas2, const_tp, rho)
        assert gp > 0.0


def test_G_out_of_bracket_raises(gas2, const_tp):
    with pytest.raises(ValueError, match="out of bracket"):
        G_eval(gas2, const_tp, 5.3)  # D < 0 somewhere above rho0 with u small


def test_triple_constant_case_against_oracle(gas2, const_tp):
    triple = solve_triple(gas2, const_tp, 1.0)
    oracle = brentq(lambda r: closed_form_G(r) - 9.0, 3.5, 5.0, xtol=1e-13)
    assert triple.rho1 == pytest.approx(oracle, abs=1e-6)
    assert triple.rho1 == pytest.approx(4.933, abs=5e-4)
    u1 = np.sqrt(21.0 - 4.0 * triple.rho1)
    assert triple.u1(5.0) == pytest.approx(u1, rel=1e-10)
    assert u1 == pytest.approx(1.126, abs=5e-4)
    # mass conservation at s = L
    assert triple.rho1 * u1 * 9.0 == pytest.approx(50.0, rel=1e-8)
    # chi affine for a constant integrand
    chi_expected = 1.0 + triple.s_grid * 0.9
    assert np.max(np.abs(triple.chi - chi_expected)) < 1e-8


def test_triple_residuals_constant_case(gas2, const_tp):
    triple = solve_triple(gas2, const_tp, 1.0)
    report = verify_triple(triple, const_tp)
    m_L = const_tp.m_L
    assert report["max_bernoulli_residual"] <= 1e-8 * m_L
    assert report["max_mass_residual"] <= 1e-8 * m_L
    assert report["chi_shift_within_J"]
    assert report["barrier_ordered"]
    assert report["barrier_gap_max"] <= report["barrier_gap_bound"] + 1e-9


def test_triple_general_convex_case(gas2, convex_profile):
    tp = truncate(convex_profile, 8.0, 10.0)
    triple = solve_triple(gas2, tp, 0.5)
    assert 0.0 < triple.rho1 < tp.rho0
    report = verify_triple(triple, tp)
    assert report["chi_shift_min"] >= -1e-9
    assert report["chi_shift_max"] <= triple.J + 1e-9
    assert report["barrier_ordered"]
    # subsonic downstream speed: u1 < c(rho1)
    c1 = np.sqrt(2.0 * triple.rho1)
    assert np.max(triple.u1_grid) < c1
    # momentum comparison used in the chi-shift proof
    mom0 = tp.rho0 * tp.u0L(tp._xs)[0]
    mom1 = triple.rho1 * triple.u1(triple.chi)
    assert np.all(mom0 < mom1 + 1e-10)


def test_triple_endpoint_identities(gas2, convex_profile):
    tp = truncate(convex_profile, 8.0, 10.0)
    triple = solve_triple(gas2, tp, 0.5)
    assert triple.chi[0] == pytest.approx(triple.J)
    assert triple.chi[-1] == pytest.approx(tp.L, rel=1e-9)
    assert triple.psihat(triple.J) == pytest.approx(0.0, abs=1e-12)
    assert triple.psihat(tp.L) == pytest.approx(tp.m_L, rel=1e-8)
    # barpsi(L) - psihat(L) >= 0 (barrier ordering at the top)
    assert tp.barpsi(tp.L) - triple.psihat(tp.L) >= -1e-8 * tp.m_L


def test_triple_reports_when_L_too_small(gas2):
    # tiny L starves G of room: no admissible triple
    prof = UpstreamProfile.constant(1.0)
    tp = truncate(prof, 1.05, 4.0)
    with pytest.raises(ValueError, match="no admissible triple"):
        solve_triple(gas2, tp, 3.5)
