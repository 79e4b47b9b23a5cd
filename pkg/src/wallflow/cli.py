"""Batch front door: flat-file configuration, run orchestration, exports.

Config files are flat ``key = value`` lines with dotted keys (no sections,
no nesting); ``#`` starts a comment.  Reports are flat ``key: value`` lines.
Exit codes: 0 success, 2 certification failure, 3 non-convergence,
4 configuration error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from wallflow.analysis import PoincareCase, poincare_check, random_poincare_cases
from wallflow.continuation import SolveTemplate, locate_critical, scan, write_scan_csv
from wallflow.diagnostics import (default_seeds, export_csv, farfield_decay,
                                  mirror_symmetric_body, primitives, trace_streamline)
from wallflow.farfield import solve_triple, verify_triple
from wallflow.gas import GasLaw, enthalpy, invert_bernoulli, rho_sonic, rho_stagnation
from wallflow.geometry import WallShape
from wallflow.solver import PicardDivergence, check_bounds, make_setup, picard_solve
from wallflow.upstream import Cutoff, UpstreamProfile, truncate, validate

__all__ = ["RunConfig", "parse_config", "run", "main"]

EXIT_OK = 0
EXIT_NOT_CERTIFIED = 2
EXIT_NO_CONVERGENCE = 3
EXIT_CONFIG = 4

_KNOWN_KEYS = {
    "gas.gamma",
    "profile.kind", "profile.ubar", "profile.a", "profile.p",
    "profile.eps", "profile.k", "profile.csv_path",
    "wall.kind", "wall.height", "wall.csv_path",
    "domain.L", "domain.N", "domain.nx", "domain.ny",
    "solver.theta", "solver.picard_tol", "solver.lin_tol", "solver.max_iters",
    "solver.t0", "solver.t1", "solver.cap", "solver.eps_n",
    "rho0", "scan.hi", "scan.lo", "scan.steps", "critical.tol",
    "output.dir",
}

_FLOAT_KEYS = {
    "gas.gamma", "profile.ubar", "profile.a", "profile.p", "profile.eps",
    "profile.k", "wall.height", "domain.L", "domain.N", "solver.theta",
    "solver.picard_tol", "solver.lin_tol", "solver.t0", "solver.t1",
    "solver.cap", "solver.eps_n", "rho0", "scan.hi", "scan.lo", "critical.tol",
}
_INT_KEYS = {"domain.nx", "domain.ny", "solver.max_iters", "scan.steps"}


@dataclass
class RunConfig:
    """Parsed configuration with defaults matching the solver contracts."""

    gamma: float = 2.0
    profile_kind: str = "constant"
    ubar: float = 1.0
    a: float = 0.0
    p: float = 1.0
    eps: float = 0.0
    k: float = 2.0
    profile_csv: str | None = None
    wall_kind: str = "flat"
    wall_height: float = 0.0
    wall_csv: str | None = None
    L: float = 10.0
    N: float = 8.0
    nx: int = 64
    ny: int = 32
    theta: float = 0.7
    picard_tol: float = 1e-9
    lin_tol: float = 1e-10
    max_iters: int = 500
    t0: float | None = None
    t1: float | None = None
    cap: float | None = None
    eps_n: float | None = None
    rho0: float | None = None
    scan_hi: float | None = None
    scan_lo: float | None = None
    scan_steps: int = 8
    critical_tol: float | None = None
    out_dir: str = "out"

    def cutoff(self) -> Cutoff:
        if self.t0 is not None or self.t1 is not None or self.cap is not None:
            if None in (self.t0, self.t1, self.cap):
                raise ValueError("solver.t0, solver.t1, solver.cap must be given together")
            return Cutoff(self.t0, self.t1, self.cap)
        if self.eps_n is not None:
            return Cutoff.from_eps(self.eps_n)
        return Cutoff()

    def profile(self) -> UpstreamProfile:
        kind = self.profile_kind
        if kind == "constant":
            return UpstreamProfile.constant(self.ubar)
        if kind == "convex_decay":
            return UpstreamProfile.convex_decay(self.ubar, self.a, self.p)
        if kind == "perturbation":
            return UpstreamProfile.perturbation(self.ubar, self.eps, self.k)
        if kind == "tabulated":
            if not self.profile_csv:
                raise ValueError("tabulated profile needs profile.csv_path")
            return UpstreamProfile.from_csv(self.profile_csv)
        raise ValueError(f"unknown profile kind {kind!r}")

    def wall(self) -> WallShape:
        kind = self.wall_kind
        if kind == "flat":
            return WallShape.flat()
        if kind == "smooth_bump":
            return WallShape.smooth_bump(self.wall_height)
        if kind == "corner_bump":
            return WallShape.corner_bump(self.wall_height)
        if kind == "csv":
            if not self.wall_csv:
                raise ValueError("csv wall needs wall.csv_path")
            return WallShape.from_csv(self.wall_csv)
        raise ValueError(f"unknown wall kind {kind!r}")

    def template(self) -> SolveTemplate:
        return SolveTemplate(gas=GasLaw(self.gamma), profile=self.profile(),
                             wall=self.wall(), L=self.L, N=self.N,
                             nx=self.nx, ny=self.ny, cutoff=self.cutoff(),
                             theta=self.theta, picard_tol=self.picard_tol,
                             max_iters=self.max_iters)


def parse_config(path) -> RunConfig:
    """Read a flat key = value file; unknown keys are configuration errors."""
    pairs = {}
    text = Path(path).read_text()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _KNOWN_KEYS:
            raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
        if key in pairs:
            raise ValueError(f"{path}:{lineno}: duplicate config key {key!r}")
        pairs[key] = value

    cfg = RunConfig()
    mapping = {
        "gas.gamma": "gamma",
        "profile.kind": "profile_kind", "profile.ubar": "ubar", "profile.a": "a",
        "profile.p": "p", "profile.eps": "eps", "profile.k": "k",
        "profile.csv_path": "profile_csv",
        "wall.kind": "wall_kind", "wall.height": "wall_height",
        "wall.csv_path": "wall_csv",
        "domain.L": "L", "domain.N": "N", "domain.nx": "nx", "domain.ny": "ny",
        "solver.theta": "theta", "solver.picard_tol": "picard_tol",
        "solver.lin_tol": "lin_tol", "solver.max_iters": "max_iters",
        "solver.t0": "t0", "solver.t1": "t1", "solver.cap": "cap",
        "solver.eps_n": "eps_n",
        "rho0": "rho0", "scan.hi": "scan_hi", "scan.lo": "scan_lo",
        "scan.steps": "scan_steps", "critical.tol": "critical_tol",
        "output.dir": "out_dir",
    }
    for key, value in pairs.items():
        attr = mapping[key]
        if key in _FLOAT_KEYS:
            try:
                parsed = float(value)
            except ValueError as exc:
                raise ValueError(f"config key {key}: not a number: {value!r}") from exc
        elif key in _INT_KEYS:
            try:
                parsed = int(value)
            except ValueError as exc:
                raise ValueError(f"config key {key}: not an integer: {value!r}") from exc
        else:
            parsed = value
        setattr(cfg, attr, parsed)
    return cfg


def _emit_report(lines, out_dir: Path, name: str):
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / name).write_text(text)


def _cmd_solve(cfg: RunConfig, out_dir: Path, mirror: bool = False) -> int:
    if cfg.rho0 is None:
        raise ValueError("solve needs rho0")
    template = cfg.template()
    setup = make_setup(template.gas, template.profile, template.wall, cfg.rho0,
                       cfg.L, cfg.N, cfg.nx, cfg.ny, cutoff=template.cutoff)
    try:
        state, report = picard_solve(setup, theta=cfg.theta,
                                     picard_tol=cfg.picard_tol,
                                     lin_tol=cfg.lin_tol, max_iters=cfg.max_iters)
    except PicardDivergence as exc:
        _emit_report([f"error: {exc}"] + (exc.report.lines() if exc.report else []),
                     out_dir, "report.txt")
        return EXIT_NO_CONVERGENCE

    lines = [f"rho0: {cfg.rho0:.12g}", f"rho0_star: {setup.rho0_star:.12g}",
             f"m_L: {setup.m_L:.12g}"]
    if setup.wall.J > 0.0:
        triple = solve_triple(setup.gas, setup.tprofile, setup.wall.J)
        report.bound_violations = check_bounds(state, triple)
        lines.append(f"rho1: {triple.rho1:.12g}")
    else:
        report.bound_violations = check_bounds(state)
    lines += report.lines()
    _emit_report(lines, out_dir, "report.txt")
    export_csv(state, out_dir / "fields.csv")
    if mirror:
        mirrored = mirror_symmetric_body(primitives(state))
        _write_mirror_csv(mirrored, out_dir / "mirrored.csv")
    return EXIT_OK if not report.truncation_active else EXIT_NOT_CERTIFIED


def _write_mirror_csv(mirrored: dict, path: Path) -> None:
    keys = ["x1", "x2", "psi", "rho", "u", "v"]
    arrays = [mirrored[k] for k in keys]
    ni, nj = arrays[0].shape
    with open(path, "w", newline="") as handle:
        handle.write(",".join(keys) + "\n")
        for j in range(nj):
            for i in range(ni):
                handle.write(",".join(f"{a[i, j]:.12g}" for a in arrays) + "\n")


def _cmd_scan(cfg: RunConfig, out_dir: Path, threads: int) -> int:
    if cfg.scan_hi is None or cfg.scan_lo is None:
        raise ValueError("scan needs scan.hi and scan.lo")
    rho0s = np.geomspace(cfg.scan_hi, cfg.scan_lo, cfg.scan_steps)
    result = scan(cfg.template(), rho0s, threads=max(threads, 1))
    lines = [f"entries: {len(result.entries)}"]
    if result.mach_slope is not None:
        lines.append(f"mach_slope: {result.mach_slope:.6g}")
    if result.rho_cr_bracket is not None:
        lines.append(f"rho_cr_bracket_lo: {result.rho_cr_bracket[0]:.12g}")
        lines.append(f"rho_cr_bracket_hi: {result.rho_cr_bracket[1]:.12g}")
    _emit_report(lines, out_dir, "report.txt")
    out_dir.mkdir(parents=True, exist_ok=True)
    write_scan_csv(result, out_dir / "scan.csv")
    return EXIT_OK


def _cmd_critical(cfg: RunConfig, out_dir: Path) -> int:
    if cfg.scan_hi is None or cfg.scan_lo is None:
        raise ValueError("critical needs scan.lo and scan.hi as the bracket")
    template = cfg.template()
    gas = GasLaw(cfg.gamma)
    tp = truncate(cfg.profile(), max(cfg.scan_hi, 1.0), cfg.L)
    rho0_star = (tp.u_max ** 2 / cfg.gamma) ** (1.0 / (cfg.gamma - 1.0))
    tol = cfg.critical_tol if cfg.critical_tol is not None else 1e-3 * rho0_star
    result = locate_critical(template, (cfg.scan_lo, cfg.scan_hi), tol)
    lines = [
        f"rho_cr_lo: {result['bracket'][0]:.12g}",
        f"rho_cr_hi: {result['bracket'][1]:.12g}",
        f"rho_cr_estimate: {result['rho_cr_estimate']:.12g}",
        f"alternative: {result['alternative']}",
        f"threshold: {result['threshold']:.12g}",
        f"hi_M_ratio: {result['hi_M_ratio']:.12g}",
        f"solves: {result['solves']}",
    ]
    _emit_report(lines, out_dir, "report.txt")
    return EXIT_OK


def _cmd_triple(cfg: RunConfig, out_dir: Path) -> int:
    if cfg.rho0 is None:
        raise ValueError("triple needs rho0")
    gas = GasLaw(cfg.gamma)
    tp = truncate(cfg.profile(), cfg.rho0, cfg.L)
    wall = cfg.wall()
    triple = solve_triple(gas, tp, wall.J)
    rep = verify_triple(triple, tp)
    lines = [f"rho1: {triple.rho1:.12g}", f"J: {triple.J:.12g}"]
    lines += [f"{k}: {v:.12g}" if isinstance(v, float) else f"{k}: {v}"
              for k, v in rep.items()]
    _emit_report(lines, out_dir, "report.txt")
    return EXIT_OK


def _cmd_verify(cfg: RunConfig, out_dir: Path) -> int:
    """Cheap deterministic invariant suite; exits 0 only if all green."""
    gas = GasLaw(cfg.gamma)
    checks = []

    rng = np.random.default_rng(0)
    s = rng.uniform(0.5, 50.0, 20000)
    lo, hi = rho_sonic(gas, s), rho_stagnation(gas, s)
    rho = lo + rng.uniform(1e-5, 1.0, s.size) * (hi - lo)
    m2 = 2.0 * rho ** 2 * (s - enthalpy(gas, rho))
    err = np.max(np.abs(invert_bernoulli(gas, m2, s) - rho) / rho)
    checks.append(("bernoulli_roundtrip", err < 1e-10, f"max rel err {err:.3g}"))

    cut = cfg.cutoff()
    grid = np.linspace(-2.0, 2.0, 40001)
    vals = cut(grid)
    checks.append(("cutoff_monotone", bool(np.all(np.diff(vals) >= -1e-12)),
                   "nondecreasing on [-2, 2]"))
    checks.append(("cutoff_capped", bool(np.max(np.abs(vals)) <= cut.cap + 1e-12),
                   f"|zeta| <= {cut.cap}"))

    prof = cfg.profile()
    viols = validate(prof)
    checks.append(("profile_hypotheses", not viols, ";".join(viols) or "ok"))
    rho_probe = cfg.rho0 if cfg.rho0 is not None else 8.0
    tp = truncate(prof, rho_probe, cfg.L)
    xg = np.linspace(0.0, cfg.L, 2001)
    round_err = np.max(np.abs(tp.kappa(tp.barpsi(xg)) - xg))
    checks.append(("kappa_barpsi_roundtrip", round_err < 1e-8 * cfg.L,
                   f"max err {round_err:.3g}"))

    ones = lambda t: np.ones_like(np.asarray(t, dtype=float))
    zeros = lambda t: np.zeros_like(np.asarray(t, dtype=float))
    lhs, rhs, holds = poincare_check(PoincareCase(0.0, np.inf, 3.0, ones, zeros))
    checks.append(("poincare_closed_form",
                   holds and abs(lhs - 0.5) < 1e-6 and abs(rhs - 1.0) < 1e-12,
                   f"lhs {lhs:.6g} rhs {rhs:.6g}"))
    rand_ok = all(poincare_check(c)[2] for c in random_poincare_cases(100))
    checks.append(("poincare_random_100", rand_ok, "all hold"))

    lines = [f"{name}: {'pass' if ok else 'FAIL'} ({note})" for name, ok, note in checks]
    all_ok = all(ok for _, ok, _ in checks)
    lines.append(f"verify: {'pass' if all_ok else 'FAIL'}")
    _emit_report(lines, out_dir, "report.txt")
    return EXIT_OK if all_ok else EXIT_NOT_CERTIFIED


def run(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="wallflow",
        description="Subsonic flow past a wall: solve, scan, and verify.")
    parser.add_argument("command",
                        choices=["solve", "scan", "critical", "triple", "verify", "export"])
    parser.add_argument("--config", required=True, help="flat key = value config file")
    parser.add_argument("--out", default=None, help="output directory (overrides output.dir)")
    parser.add_argument("--threads", type=int, default=0, help="scan workers (0 = auto)")
    parser.add_argument("--mirror", action="store_true",
                        help="with export: mirror fields across x2 = 0")
    args = parser.parse_args(argv)

    try:
        cfg = parse_config(args.config)
        out_dir = Path(args.out) if args.out else Path(cfg.out_dir)
        threads = args.threads if args.threads > 0 else 1
        if args.command == "solve":
            return _cmd_solve(cfg, out_dir)
        if args.command == "export":
            return _cmd_solve(cfg, out_dir, mirror=args.mirror)
        if args.command == "scan":
            return _cmd_scan(cfg, out_dir, threads)
        if args.command == "critical":
            return _cmd_critical(cfg, out_dir)
        if args.command == "triple":
            return _cmd_triple(cfg, out_dir)
        if args.command == "verify":
            return _cmd_verify(cfg, out_dir)
        raise ValueError(f"unknown command {args.command!r}")
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
