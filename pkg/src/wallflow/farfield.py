"""Downstream matched state and the lower barrier for the stream function.

Far downstream the flow forgets the bump: mass and Bernoulli conservation
match the incoming profile (rho0, u0L) on [0, L] to a triple
(chi, rho1, u1) with chi an increasing map of [0, L] onto [J, L],

    u0L(s)^2/2 + h(rho0) = u1(chi(s))^2/2 + h(rho1),
    int_0^s rho0 u0L = int_J^chi(s) rho1 u1,
    d chi/ds = rho0 u0L(s) / (rho1 sqrt(D(s; rho1))),

where D(s; rho) = 2(h(rho0) - h(rho)) + u0L(s)^2.  The density rho1 is the
unique root of G(rho) = int_0^L rho0 u0L / (rho sqrt(D)) = L - J, found by
bisection on a bracket whose lower end is the sonic density of the fastest
incoming streamline.  The matched state integrates to the lower barrier
psihat(x2) = rho1 int_J^x2 u1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from wallflow import gas as gaslib
from wallflow.gas import GasLaw
from wallflow.upstream import TruncatedProfile

__all__ = ["FarfieldTriple", "D_eval", "G_eval", "solve_triple", "verify_triple"]

_BISECT_CAP = 200


@dataclass
class FarfieldTriple:
    """Matched downstream state (chi, rho1, u1) and the barrier psihat."""

    gas: GasLaw
    rho0: float
    rho1: float
    J: float
    L: float
    s_grid: np.ndarray = field(repr=False)
    chi: np.ndarray = field(repr=False)
    u1_grid: np.ndarray = field(repr=False)       # u1 at chi(s_grid)
    x2_grid: np.ndarray = field(repr=False)       # uniform grid on [J, L]
    u1_of: PchipInterpolator = field(repr=False)
    psihat_vals: np.ndarray = field(repr=False)

    def u1(self, x2):
        return self.u1_of(np.clip(x2, self.J, self.L))

    def psihat(self, x2):
        """Lower barrier rho1 * int_J^x2 u1 on [J, L]."""
        return np.interp(np.clip(x2, self.J, self.L), self.x2_grid, self.psihat_vals)


def D_eval(gas: GasLaw, tp: TruncatedProfile, rho, s):
    """D(s; rho) = 2 (h(rho0) - h(rho)) + u0L(s)^2; may be <= 0 off-bracket."""
    h0 = gaslib.enthalpy(gas, tp.rho0)
    u = tp.u0L(s)[0]
    return 2.0 * (h0 - gaslib.enthalpy(gas, rho)) + u * u


def G_eval(gas: GasLaw, tp: TruncatedProfile, rho):
    """G(rho) = int_0^L rho0 u0L / (rho sqrt(D)) and a numerical G'.

    Composite Simpson on the profile table grid.  Raises if D(s; rho) is
    not positive everywhere (rho outside the admissible bracket).
    """
    def integral(r):
        xs = tp._xs
        mids = 0.5 * (xs[:-1] + xs[1:])
        h = xs[1] - xs[0]
        d_nodes = D_eval(gas, tp, r, xs)
        d_mids = D_eval(gas, tp, r, mids)
        if np.min(d_nodes) <= 0.0 or np.min(d_mids) <= 0.0:
            raise ValueError(f"rho = {r} out of bracket: D(s; rho) <= 0 on [0, L]")
        fn = tp.rho0 * tp.u0L(xs)[0] / (r * np.sqrt(d_nodes))
        fm = tp.rho0 * tp.u0L(mids)[0] / (r * np.sqrt(d_mids))
        return float(np.sum(h / 6.0 * (fn[:-1] + 4.0 * fm + fn[1:])))

    g_val = integral(rho)
    dr = 1e-6 * rho
    g_prime = (integral(rho + dr) - integral(rho - dr)) / (2.0 * dr)
    return g_val, g_prime


def solve_triple(gas: GasLaw, tp: TruncatedProfile, J: float,
                 tol_factor: float = 1e-10) -> FarfieldTriple:
    """Construct the downstream triple for a wall of height J.

    Bisection for rho1 with G(rho1) = L - J on (rho_sonic(s_max), rho0),
    then fourth-order integration of the chi equation and cumulative
    quadrature of the barrier.
    """
    L, rho0 = tp.L, tp.rho0
    if not 0.0 <= J < L:
        raise ValueError("wall height J must lie in [0, L)")
    h0 = gaslib.enthalpy(gas, rho0)
    s_max = float(h0 + 0.5 * tp.u_max ** 2)
    rho_lo = float(gaslib.rho_sonic(gas, s_max))
    target = L - J

    g_lo, _ = G_eval(gas, tp, rho_lo * (1.0 + 1e-14))
    g_hi, _ = G_eval(gas, tp, rho0)
    if not (g_lo < target < g_hi):
        raise ValueError(
            "no admissible triple (L too small or rho0 too small): "
            f"G on bracket spans [{g_lo:.6g}, {g_hi:.6g}], need {target:.6g}")

    lo, hi = rho_lo, rho0
    tol = tol_factor * L
    rho1 = 0.5 * (lo + hi)
    for _ in range(_BISECT_CAP):
        rho1 = 0.5 * (lo + hi)
        g_mid, _ = G_eval(gas, tp, rho1)
        if abs(g_mid - target) <= tol:
            break
        if g_mid < target:
            lo = rho1
        else:
            hi = rho1
    else:
        raise RuntimeError("triple bisection did not meet tolerance within cap")

    # chi' depends on s only, so RK4 reduces to per-step Simpson increments.
    xs = tp._xs
    mids = 0.5 * (xs[:-1] + xs[1:])
    h = xs[1] - xs[0]

    def slope(s):
        return rho0 * tp.u0L(s)[0] / (rho1 * np.sqrt(D_eval(gas, tp, rho1, s)))

    increments = h / 6.0 * (slope(xs[:-1]) + 4.0 * slope(mids) + slope(xs[1:]))
    chi = J + np.concatenate(([0.0], np.cumsum(increments)))
    u1_grid = np.sqrt(D_eval(gas, tp, rho1, xs))
    u1_of = PchipInterpolator(chi, u1_grid)

    x2_grid = np.linspace(J, L, 2049)
    u1_nodes = u1_of(x2_grid)
    u1_mids = u1_of(0.5 * (x2_grid[:-1] + x2_grid[1:]))
    dh = x2_grid[1] - x2_grid[0]
    psihat_vals = rho1 * np.concatenate(
        ([0.0], np.cumsum(dh / 6.0 * (u1_nodes[:-1] + 4.0 * u1_mids + u1_nodes[1:]))))

    return FarfieldTriple(gas=gas, rho0=rho0, rho1=float(rho1), J=float(J), L=L,
                          s_grid=xs, chi=chi, u1_grid=u1_grid, x2_grid=x2_grid,
                          u1_of=u1_of, psihat_vals=psihat_vals)


def verify_triple(triple: FarfieldTriple, tp: TruncatedProfile) -> dict:
    """Residuals of the matching relations and the barrier orderings."""
    gas = triple.gas
    h0 = gaslib.enthalpy(gas, tp.rho0)
    h1 = gaslib.enthalpy(gas, triple.rho1)
    s = triple.s_grid
    u0 = tp.u0L(s)[0]
    u1_at_chi = triple.u1(triple.chi)
    bernoulli_res = np.abs(0.5 * u0 ** 2 + h0 - 0.5 * u1_at_chi ** 2 - h1)
    mass_res = np.abs(tp.rho0 * tp.cumflux(s) - triple.psihat(triple.chi))

    shift = triple.chi - s
    x2 = triple.x2_grid
    gap = tp.barpsi(x2) - triple.psihat(x2)
    gap_bound = tp.rho0 * triple.J * tp.u_max
    return {
        "max_bernoulli_residual": float(np.max(bernoulli_res)),
        "max_mass_residual": float(np.max(mass_res)),
        "chi_shift_min": float(np.min(shift)),
        "chi_shift_max": float(np.max(shift)),
        "chi_shift_within_J": bool(np.all((shift >= -1e-10 * tp.L) & (shift <= triple.J + 1e-10 * tp.L))),
        "barrier_gap_min": float(np.min(gap)),
        "barrier_gap_max": float(np.max(gap)),
        "barrier_gap_bound": float(gap_bound),
        "barrier_ordered": bool(np.all(gap >= -1e-9 * max(tp.m_L, 1.0))),
    }
