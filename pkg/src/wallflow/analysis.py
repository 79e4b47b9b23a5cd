"""Standalone property checks: the weighted Poincare inequality and
grid-convergence studies.

The inequality under test, for g in H^1(a, b) with a >= 0 and l > 2:

    int_a^b g^2/(1+s)^l ds  <=  2 g(a)^2/(l-1) + 4/(l-1)^2 int_a^b g'^2 ds.

Infinite intervals are capped numerically with a tail bound added to the
left side as a safety margin.  Grid convergence estimates the observed
order of the flat-wall solver error under mesh doubling, Richardson style.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from wallflow.gas import GasLaw
from wallflow.geometry import WallShape
from wallflow.solver import make_setup, picard_solve
from wallflow.upstream import Cutoff, UpstreamProfile

__all__ = ["PoincareCase", "poincare_check", "random_poincare_cases", "grid_convergence"]

_CAP = 1e3


@dataclass
class PoincareCase:
    """Interval (a, b), exponent l > 2, and a C^1 test function with derivative."""

    a: float
    b: float  # np.inf allowed; capped in quadrature
    l: float
    g: callable
    gprime: callable
    label: str = ""


def _simpson(fun, a, b, n):
    xs = np.linspace(a, b, n + 1)
    mids = 0.5 * (xs[:-1] + xs[1:])
    h = (b - a) / n
    return float(np.sum(h / 6.0 * (fun(xs[:-1]) + 4.0 * fun(mids) + fun(xs[1:]))))


def _converged_quad(fun, a, b, rel_tol=1e-8, n0=2048, max_doublings=8):
    """Composite Simpson, refined until doubling changes the value < rel_tol."""
    val = _simpson(fun, a, b, n0)
    n = n0
    for _ in range(max_doublings):
        n *= 2
        new = _simpson(fun, a, b, n)
        if abs(new - val) <= rel_tol * max(abs(new), 1e-300):
            return new
        val = new
    return val


def poincare_check(case: PoincareCase) -> tuple[float, float, bool]:
    """Return (lhs, rhs, holds) for the weighted inequality."""
    if not case.l > 2.0:
        raise ValueError(f"exponent l must exceed 2, got {case.l}")
    if case.a < 0.0:
        raise ValueError("interval must start at a >= 0")
    a, l = case.a, case.l
    b = min(case.b, _CAP)
    capped = case.b > b

    lhs = _converged_quad(lambda s: case.g(s) ** 2 / (1.0 + s) ** l, a, b)
    rhs_int = _converged_quad(lambda s: case.gprime(s) ** 2, a, b)
    if capped:
        # Tail of the weighted term, bounded by the sup of |g| past the cap.
        tail_sup = float(np.max(np.abs(case.g(np.linspace(b, 10.0 * b, 257)))))
        lhs += tail_sup ** 2 * (1.0 + b) ** (1.0 - l) / (l - 1.0)
    g_a = float(case.g(np.asarray(a)))
    rhs = 2.0 * g_a ** 2 / (l - 1.0) + 4.0 / (l - 1.0) ** 2 * rhs_int
    return lhs, rhs, bool(lhs <= rhs + 1e-10)


def random_poincare_cases(count: int = 100, seed: int = 0) -> list[PoincareCase]:
    """Gaussian-bump sums over random intervals and exponents."""
    rng = np.random.default_rng(seed)
    exponents = (2.5, 3.0, 4.0, 6.0)
    cases = []
    for idx in range(count):
        n_bumps = int(rng.integers(1, 5))
        amps = rng.uniform(-2.0, 2.0, n_bumps)
        centers = rng.uniform(0.0, 20.0, n_bumps)
        widths = rng.uniform(0.3, 4.0, n_bumps)
        a = float(rng.uniform(0.0, 2.0))
        b = float(rng.choice([np.inf, rng.uniform(5.0, 50.0)]))

        def g(s, amps=amps, centers=centers, widths=widths):
            s = np.asarray(s, dtype=float)
            return sum(A * np.exp(-((s - c) / w) ** 2 / 2.0)
                       for A, c, w in zip(amps, centers, widths))

        def gp(s, amps=amps, centers=centers, widths=widths):
            s = np.asarray(s, dtype=float)
            return sum(-A * (s - c) / w ** 2 * np.exp(-((s - c) / w) ** 2 / 2.0)
                       for A, c, w in zip(amps, centers, widths))

        cases.append(PoincareCase(a=a, b=b, l=float(exponents[idx % 4]),
                                  g=g, gprime=gp, label=f"random-{idx}"))
    return cases


def grid_convergence(gas: GasLaw, profile: UpstreamProfile, rho0: float,
                     L: float = 10.0, N: float = 8.0, base_cells=(32, 16),
                     levels: int = 3, cutoff: Cutoff | None = None) -> dict:
    """Observed order of the flat-wall error under mesh doubling.

    The flat-wall problem has the transplanted upstream flux as its exact
    solution, so the sup error against it is a true discretization error.
    Non-monotone errors report no order.
    """
    if levels < 3:
        raise ValueError("need at least 3 refinement levels")
    wall = WallShape.flat()
    errors = []
    for lev in range(levels):
        nx = base_cells[0] * 2 ** lev
        ny = base_cells[1] * 2 ** lev
        setup = make_setup(gas, profile, wall, rho0, L, N, nx, ny, cutoff=cutoff)
        state, _ = picard_solve(setup)
        errors.append(float(np.max(np.abs(state.psi - setup.barpsi_nodes()))))
    monotone = all(e1 > e2 for e1, e2 in zip(errors, errors[1:]))
    solver_floor = 1e-8 * rho0
    orders = None
    if monotone and errors[-1] > solver_floor:
        orders = [float(np.log2(e1 / e2)) for e1, e2 in zip(errors, errors[1:])]
    return {"errors": errors, "orders": orders, "monotone": monotone}
