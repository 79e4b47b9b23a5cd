"""Scan the incoming density and locate the critical value by bisection.

For fixed gas, profile, wall, and mesh, each incoming density rho0 gets an
independent solve and a subsonic certificate.  Along a decreasing scan the
momentum ratio grows toward the cutoff threshold; "critical" at the
discrete level means loss of the certificate (converged and M_ratio below
the identity threshold t0), not loss of existence.  The bisection reports
which alternative it saw: the ratio walking into the threshold, or the
outer iteration failing outright.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from wallflow.gas import GasLaw
from wallflow.geometry import WallShape
from wallflow.solver import PicardDivergence, make_setup, picard_solve
from wallflow.upstream import Cutoff, UpstreamProfile

__all__ = ["SolveTemplate", "ScanEntry", "ScanResult", "scan", "locate_critical", "write_scan_csv"]


@dataclass(frozen=True)
class SolveTemplate:
    """Everything but rho0; continuation re-truncates the profile per entry."""

    gas: GasLaw
    profile: UpstreamProfile
    wall: WallShape
    L: float
    N: float
    nx: int
    ny: int
    cutoff: Cutoff = field(default_factory=Cutoff)
    theta: float = 0.7
    picard_tol: float = 1e-9
    max_iters: int = 500

    def solve(self, rho0: float):
        setup = make_setup(self.gas, self.profile, self.wall, rho0,
                           self.L, self.N, self.nx, self.ny, cutoff=self.cutoff)
        state, report = picard_solve(setup, theta=self.theta,
                                     picard_tol=self.picard_tol,
                                     max_iters=self.max_iters)
        return setup, state, report


@dataclass
class ScanEntry:
    rho0: float
    converged: bool
    M_ratio: float
    max_mach: float
    truncation_active: bool

    @property
    def certified(self) -> bool:
        return self.converged and not self.truncation_active


@dataclass
class ScanResult:
    entries: list
    rho_cr_bracket: tuple | None
    mach_slope: float | None

    def certified_entries(self):
        return [e for e in self.entries if e.certified]


def _solve_entry(template: SolveTemplate, rho0: float) -> ScanEntry:
    try:
        _, _, report = template.solve(rho0)
        return ScanEntry(rho0=rho0, converged=True, M_ratio=report.M_ratio,
                         max_mach=report.max_mach,
                         truncation_active=report.truncation_active)
    except PicardDivergence as exc:
        rep = exc.report
        return ScanEntry(rho0=rho0, converged=False,
                         M_ratio=rep.M_ratio if rep else np.nan,
                         max_mach=rep.max_mach if rep else np.nan,
                         truncation_active=True)


def scan(template: SolveTemplate, rho0_list, threads: int = 1) -> ScanResult:
    """Solve-and-certify each density; entries sorted by rho0 descending.

    Failed or truncation-active runs are flagged, never raised.  The Mach
    slope is the least-squares fit of log(max_mach) against log(rho0) over
    the certified entries.
    """
    rho0s = sorted(set(float(r) for r in rho0_list), reverse=True)
    if any(r <= 0.0 for r in rho0s):
        raise ValueError("scan densities must be positive")
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            entries = list(pool.map(lambda r: _solve_entry(template, r), rho0s))
    else:
        entries = [_solve_entry(template, r) for r in rho0s]

    bracket = None
    for hi_e, lo_e in zip(entries, entries[1:]):
        if hi_e.certified and not lo_e.certified:
            bracket = (lo_e.rho0, hi_e.rho0)
            break

    certified = [e for e in entries if e.certified]
    slope = None
    if len(certified) >= 2:
        logs_r = np.log([e.rho0 for e in certified])
        logs_m = np.log([e.max_mach for e in certified])
        slope = float(np.polyfit(logs_r, logs_m, 1)[0])
    return ScanResult(entries=entries, rho_cr_bracket=bracket, mach_slope=slope)


def locate_critical(template: SolveTemplate, bracket, tol: float,
                    max_solves: int = 60) -> dict:
    """Bisect rho0 on the certificate predicate down to a bracket of width tol.

    The low endpoint must fail certification and the high endpoint must
    pass, otherwise the bracket is rejected.  Returns the final bracket,
    the M_ratio trajectory, and which critical alternative was observed
    ("M_ratio -> threshold" or "no convergence").
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    if not 0.0 < lo < hi:
        raise ValueError("need bracket 0 < lo < hi")
    trajectory = []

    def probe(rho0):
        entry = _solve_entry(template, rho0)
        trajectory.append(entry)
        return entry

    lo_entry = probe(lo)
    hi_entry = probe(hi)
    if lo_entry.certified or not hi_entry.certified:
        raise ValueError(
            "predicate not monotone across bracket: "
            f"lo certified={lo_entry.certified}, hi certified={hi_entry.certified}; "
            "widen the bracket")

    failures_converged = lo_entry.converged
    solves = 2
    while hi - lo > tol and solves < max_solves:
        mid = 0.5 * (lo + hi)
        entry = probe(mid)
        solves += 1
        if entry.certified:
            hi, hi_entry = mid, entry
        else:
            lo, lo_entry = mid, entry
            failures_converged = failures_converged and entry.converged
    alternative = "M_ratio -> threshold" if failures_converged else "no convergence"
    return {
        "bracket": (lo, hi),
        "rho_cr_estimate": 0.5 * (lo + hi),
        "alternative": alternative,
        "hi_M_ratio": hi_entry.M_ratio,
        "lo_M_ratio": lo_entry.M_ratio,
        "threshold": template.cutoff.t0,
        "solves": solves,
        "trajectory": trajectory,
    }


def write_scan_csv(result: ScanResult, path) -> None:
    with open(path, "w", newline="") as handle:
        handle.write("rho0,converged,M_ratio,max_mach,truncation_active\n")
        for e in result.entries:
            handle.write(f"{e.rho0:.12g},{str(e.converged).lower()},"
                         f"{e.M_ratio:.12g},{e.max_mach:.12g},"
                         f"{str(e.truncation_active).lower()}\n")
