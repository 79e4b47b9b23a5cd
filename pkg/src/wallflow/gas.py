"""Polytropic-gas thermodynamics and the subsonic branch of the Bernoulli relation.

The pressure law is p = rho^gamma with gamma > 1, so the enthalpy is
h(rho) = gamma rho^(gamma-1)/(gamma-1) and the sound speed is
c(rho) = sqrt(gamma rho^(gamma-1)).  For a Bernoulli value s the relation

    m^2 / (2 rho^2) + h(rho) = s

has exactly one subsonic root rho in [rho_sonic(s), rho_stagnation(s)] for
every momentum 0 <= m <= Sigma(s), where Sigma(s) is the momentum of the
sonic state.  All envelope quantities are closed-form; the inversion is a
bracketed Newton iteration with bisection safeguard.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "GasLaw",
    "BernoulliEnvelope",
    "enthalpy",
    "sound_speed",
    "mach",
    "rho_sonic",
    "rho_stagnation",
    "sigma_crit",
    "envelope",
    "invert_bernoulli",
]

# Slack for "momentum exactly at the sonic value": anything within this
# relative margin above Sigma^2 is treated as the sonic endpoint.
_SONIC_SLACK = 1e-12


@dataclass(frozen=True)
class GasLaw:
    """Adiabatic exponent of the polytropic pressure law p = rho^gamma."""

    gamma: float

    def __post_init__(self):
        if not self.gamma > 1.0:
            raise ValueError(f"adiabatic exponent must exceed 1, got {self.gamma}")


@dataclass(frozen=True)
class BernoulliEnvelope:
    """Sonic/stagnation densities and critical momentum for one Bernoulli value.

    rho_sonic solves (gamma/2) rho^(gamma-1) + h(rho) = s, rho_stagnation
    solves h(rho) = s, and sigma_crit = sqrt(gamma) rho_sonic^((gamma+1)/2)
    is the largest momentum compatible with s.
    """

    s: float
    rho_sonic: float
    rho_stagnation: float
    sigma_crit: float


def _check_positive(name, value):
    arr = np.asarray(value)
    if np.any(~np.isfinite(arr)) or np.any(arr <= 0.0):
        raise ValueError(f"{name} must be positive, got {value!r}")


def enthalpy(gas: GasLaw, rho):
    """h(rho) = gamma rho^(gamma-1) / (gamma-1)."""
    _check_positive("density", rho)
    g = gas.gamma
    return g / (g - 1.0) * np.asarray(rho, dtype=float) ** (g - 1.0)


def sound_speed(gas: GasLaw, rho):
    """c(rho) = sqrt(gamma rho^(gamma-1))."""
    _check_positive("density", rho)
    g = gas.gamma
    return np.sqrt(g * np.asarray(rho, dtype=float) ** (g - 1.0))


def mach(gas: GasLaw, speed, rho):
    """Mach number of a state: |q| / c(rho)."""
    return np.abs(speed) / sound_speed(gas, rho)


def rho_sonic(gas: GasLaw, s):
    """Density of the sonic state at Bernoulli value s (closed form)."""
    g = gas.gamma
    return (2.0 * (g - 1.0) * np.asarray(s, dtype=float) / (g * (g + 1.0))) ** (1.0 / (g - 1.0))


def rho_stagnation(gas: GasLaw, s):
    """Density of the zero-speed state at Bernoulli value s (closed form)."""
    g = gas.gamma
    return ((g - 1.0) * np.asarray(s, dtype=float) / g) ** (1.0 / (g - 1.0))


def sigma_crit(gas: GasLaw, s):
    """Critical momentum Sigma(s) = sqrt(gamma) rho_sonic^((gamma+1)/2)."""
    g = gas.gamma
    return np.sqrt(g) * rho_sonic(gas, s) ** ((g + 1.0) / 2.0)


def envelope(gas: GasLaw, s: float) -> BernoulliEnvelope:
    """Sonic density, stagnation density, and critical momentum at s > 0."""
    _check_positive("Bernoulli value", s)
    s = float(s)
    return BernoulliEnvelope(
        s=s,
        rho_sonic=float(rho_sonic(gas, s)),
        rho_stagnation=float(rho_stagnation(gas, s)),
        sigma_crit=float(sigma_crit(gas, s)),
    )


def invert_bernoulli(gas: GasLaw, m_sq, s, max_iter: int = 60):
    """Subsonic density with momentum-squared m_sq at Bernoulli value s.

    Returns the unique rho in [rho_sonic(s), rho_stagnation(s)] satisfying
    m_sq/(2 rho^2) + h(rho) = s.  Momentum exactly at the critical value
    returns the sonic density; anything strictly above raises.  Accepts
    scalars or broadcastable arrays.
    """
    _check_positive("Bernoulli value", s)
    scalar = np.isscalar(m_sq) and np.isscalar(s)
    m_sq, s = np.broadcast_arrays(np.asarray(m_sq, dtype=float), np.asarray(s, dtype=float))
    m_sq = m_sq.copy()
    if np.any(m_sq < 0.0):
        raise ValueError("momentum-squared must be nonnegative")

    g = gas.gamma
    lo = rho_sonic(gas, s).copy()
    hi = rho_stagnation(gas, s).copy()
    sig_sq = g * lo ** (g + 1.0)
    if np.any(m_sq > sig_sq * (1.0 + _SONIC_SLACK)):
        worst = float(np.max(m_sq / sig_sq))
        raise ValueError(
            f"supersonic momentum: m_sq/Sigma^2 reaches {worst:.6g} > 1 "
            "(truncate with the momentum cutoff before inverting)"
        )
    np.minimum(m_sq, sig_sq, out=m_sq)

    shape = m_sq.shape
    m_sq = m_sq.ravel()
    s = s.ravel()
    lo = lo.ravel().copy()
    hi = hi.ravel().copy()
    sig_sq = sig_sq.ravel()

    rho = np.clip(hi * (1.0 - m_sq / (2.0 * sig_sq)), lo, hi)
    # Near the sonic endpoint the root is a near-double root of the residual,
    # so convergence is judged on the bracket width as well as the residual.
    res_tol = 4e-16 * s
    idx = np.arange(rho.size)
    for _ in range(max_iter):
        mi, si, ri = m_sq[idx], s[idx], rho[idx]
        res = mi / (2.0 * ri * ri) + g / (g - 1.0) * ri ** (g - 1.0) - si
        done = np.abs(res) <= res_tol[idx]
        idx, ri, res = idx[~done], ri[~done], res[~done]
        if idx.size == 0:
            break
        # Maintain the bracket: the residual is increasing in rho.
        neg = res < 0.0
        lo[idx[neg]] = ri[neg]
        hi[idx[~neg]] = ri[~neg]
        slope = (g * ri ** (g - 1.0) - m_sq[idx] / (ri * ri)) / ri
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = ri - res / slope
        inside = (slope > 0.0) & (newton > lo[idx]) & (newton < hi[idx])
        new = np.where(inside, newton, 0.5 * (lo[idx] + hi[idx]))
        rho[idx] = new
        narrow = hi[idx] - lo[idx] <= 1e-14 * new
        idx = idx[~narrow]
        if idx.size == 0:
            break

    rho = rho.reshape(shape)
    return float(rho) if scalar else rho
