import numpy as np
import pytest
from scipy.optimize import brentq

from wallflow.continuation import SolveTemplate, locate_critical, scan, write_scan_csv
from wallflow.geometry import WallShape
from wallflow.upstream import Cutoff


@pytest.fixture(scope="module")
def flat_template(gas2, constant_profile):
    return SolveTemplate(gas=gas2, profile=constant_profile, wall=WallShape.flat(),
                         L=10.0, N=8.0, nx=32, ny=16)


def closed_form_threshold(t0):
    # rho0 ubar = t0 Sigma(h(rho0) + ubar^2/2), gamma = 2, ubar = 1
    func = lambda r: r - t0 * np.sqrt(2.0) * ((2.0 * r + 0.5) / 3.0) ** 1.5
    return brentq(func, 1.0, 50.0, xtol=1e-12)


def test_scan_closed_form_mach(flat_template):
    result = scan(flat_template, [5.0])
    entry = result.entries[0]
    # flat wall constant profile: max mach = ubar / c(rho0)
    assert entry.max_mach == pytest.approx(1.0 / np.sqrt(10.0), rel=1e-9)
    assert entry.converged and entry.truncation_active  # ratio 0.54 > 1/2


def test_scan_certified_large_density(flat_template):
    # rho0 = 100 rho0*: closed-form mach is exactly 1/sqrt(2 rho0) = 0.1
    result = scan(flat_template, [50.0])
    entry = result.entries[0]
    assert entry.certified
    assert entry.max_mach <= 0.1 * (1.0 + 1e-9)


def test_scan_slope_and_ordering(flat_template):
    rho0s = np.geomspace(200.0, 20.0, 6)
    result = scan(flat_template, rho0s)
    assert [e.rho0 for e in result.entries] == sorted(
        (e.rho0 for e in result.entries), reverse=True)
    # flat-wall closed form gives the exact power law -(gamma-1)/2
    assert result.mach_slope == pytest.approx(-0.5, abs=1e-6)
    ratios = [e.M_ratio for e in result.entries if e.certified]
    assert all(a < b for a, b in zip(ratios, ratios[1:]))  # decreasing in rho0


def test_scan_marks_bracket(flat_template):
    result = scan(flat_template, [4.0, 8.0])
    assert result.rho_cr_bracket == (4.0, 8.0)


def test_scan_reproducible(flat_template):
    first = scan(flat_template, [7.0]).entries[0]
    second = scan(flat_template, [7.0]).entries[0]
    assert first.M_ratio == second.M_ratio  # identical to the last bit


def test_scan_threads_match_serial(flat_template):
    rho0s = [20.0, 40.0, 80.0]
    serial = scan(flat_template, rho0s, threads=1)
    threaded = scan(flat_template, rho0s, threads=3)
    for a, b in zip(serial.entries, threaded.entries):
        assert a.rho0 == b.rho0 and a.M_ratio == b.M_ratio


def test_scan_rejects_nonpositive(flat_template):
    with pytest.raises(ValueError):
        scan(flat_template, [5.0, -1.0])


def test_locate_critical_flat_closed_form(flat_template):
    expected = closed_form_threshold(0.5)
    result = locate_critical(flat_template, (4.0, 8.0), tol=1e-3 * 0.5)
    lo, hi = result["bracket"]
    assert lo <= expected <= hi
    assert hi - lo <= 1e-3 * 0.5
    assert result["rho_cr_estimate"] == pytest.approx(expected, rel=1e-3)
    assert result["alternative"] == "M_ratio -> threshold"
    # continuity: the passing endpoint sits within 10% of the threshold
    assert result["hi_M_ratio"] == pytest.approx(0.5, rel=0.1)
    # log2 bound on the number of solves
    assert result["solves"] <= 2 + int(np.ceil(np.log2(4.0 / (1e-3 * 0.5)))) + 1


def test_locate_critical_rejects_bad_bracket(flat_template):
    with pytest.raises(ValueError, match="not monotone"):
        locate_critical(flat_template, (20.0, 40.0), tol=0.1)  # both certified


def test_locate_critical_eps_ladder(gas2, constant_profile):
    # tightening eps_n moves thresholds toward 1 and lowers the bracket
    estimates = []
    for eps in (1 / 4, 1 / 8):
        template = SolveTemplate(gas=gas2, profile=constant_profile,
                                 wall=WallShape.flat(), L=10.0, N=8.0,
                                 nx=32, ny=16, cutoff=Cutoff.from_eps(eps))
        result = locate_critical(template, (2.0, 10.0), tol=2e-3)
        estimates.append(result["rho_cr_estimate"])
        assert result["rho_cr_estimate"] == pytest.approx(
            closed_form_threshold(1.0 - 2.0 * eps), rel=2e-3)
    assert estimates[1] < estimates[0]


def test_scan_csv_roundtrip(tmp_path, flat_template):
    result = scan(flat_template, [20.0, 40.0])
    path = tmp_path / "scan.csv"
    write_scan_csv(result, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "rho0,converged,M_ratio,max_mach,truncation_active"
    assert len(lines) == 3
    assert lines[1].startswith("40,")
