"""Incoming shear profiles, their nozzle truncation, and streamline bookkeeping.

An upstream profile u0(x2) > 0 fixes the hyperbolic data of the flow.  For a
nozzle of height L the profile is modified near the top so that its slope
vanishes at x2 = L: the derivative g_L equals u0' below L-1 and ramps
linearly to zero on (L-1, L].  The truncated profile carries the cumulative
flux table used to inverts the streamline parametrization

    psi = rho0 * integral_0^kappa u0L(s) ds,

the memory term W(psi) = F(psi) F'(psi) = u0L'(kappa(psi)) / rho0, and the
upper barrier barpsi(x2) = rho0 * integral_0^x2 u0L.  Outside [0, m_L] the
profile function F is extended continuously so Picard iterates that leave
the flux range transiently remain well defined.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

__all__ = ["UpstreamProfile", "TruncatedProfile", "Cutoff", "truncate", "validate"]

PROFILE_KINDS = ("constant", "convex_decay", "perturbation", "tabulated")

TABLE_SIZE = 2 ** 14  # cumulative-flux intervals
AUDIT_POINTS = 10 ** 4


@dataclass(frozen=True)
class UpstreamProfile:
    """Incoming horizontal velocity u0(x2) on the half line x2 >= 0.

    kinds:
      constant      u0 = ubar
      convex_decay  u0 = ubar + a / (1 + x2)^p          (a >= 0, p >= 1)
      perturbation  u0 = ubar + eps/(k(k+1)) / (1+x2)^k (k > 1); the
                    amplitude scaling makes |u0^(i)| <= eps/(1+x2)^(k+i)
                    hold for i = 1, 2 with the given eps
      tabulated     cubic spline through (x2, u0) samples
    """

    kind: str
    ubar: float
    a: float = 0.0
    p: float = 1.0
    eps: float = 0.0
    k: float = 2.0
    table_x: np.ndarray | None = field(default=None, repr=False)
    table_u: np.ndarray | None = field(default=None, repr=False)
    _spline: CubicSpline | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in PROFILE_KINDS:
            raise ValueError(f"unknown profile kind {self.kind!r}")
        if not self.ubar > 0.0:
            raise ValueError("far-field speed ubar must be positive")
        if self.kind == "convex_decay" and (self.a < 0.0 or self.p < 1.0):
            raise ValueError("convex_decay needs amplitude a >= 0 and power p >= 1")
        if self.kind == "perturbation" and (self.eps < 0.0 or self.k <= 1.0):
            raise ValueError("perturbation needs eps >= 0 and decay exponent k > 1")
        if self.kind == "tabulated":
            x = np.asarray(self.table_x, dtype=float)
            u = np.asarray(self.table_u, dtype=float)
            if x.ndim != 1 or x.size < 4 or np.any(np.diff(x) <= 0.0):
                raise ValueError("tabulated profile needs >= 4 strictly increasing x2 samples")
            if np.any(u <= 0.0):
                raise ValueError("tabulated profile must have u0 > 0")
            object.__setattr__(self, "table_x", x)
            object.__setattr__(self, "table_u", u)
            object.__setattr__(self, "_spline", CubicSpline(x, u))

    @classmethod
    def constant(cls, ubar: float) -> "UpstreamProfile":
        return cls(kind="constant", ubar=ubar)

    @classmethod
    def convex_decay(cls, ubar: float, a: float, p: float = 1.0) -> "UpstreamProfile":
        return cls(kind="convex_decay", ubar=ubar, a=a, p=p)

    @classmethod
    def perturbation(cls, ubar: float, eps: float, k: float) -> "UpstreamProfile":
        return cls(kind="perturbation", ubar=ubar, eps=eps, k=k)

    @classmethod
    def tabulated(cls, x2, u0, ubar: float | None = None) -> "UpstreamProfile":
        u = np.asarray(u0, dtype=float)
        return cls(kind="tabulated", ubar=float(u[-1] if ubar is None else ubar),
                   table_x=np.asarray(x2, dtype=float), table_u=u)

    @classmethod
    def from_csv(cls, path, ubar: float | None = None) -> "UpstreamProfile":
        """Two-column CSV (x2, u0) with a header line."""
        with open(path, newline="") as handle:
            rows = list(csv.reader(handle))
        if not rows or len(rows) < 2:
            raise ValueError(f"profile CSV {path} needs a header and data rows")
        data = np.array([[float(r[0]), float(r[1])] for r in rows[1:]])
        return cls.tabulated(data[:, 0], data[:, 1], ubar=ubar)

    def eval(self, x2):
        """Return (u0, u0', u0'') at x2 >= 0."""
        x = np.asarray(x2, dtype=float)
        if np.any(x < 0.0):
            raise ValueError("x2 must be nonnegative")
        one = np.ones_like(x)
        if self.kind == "constant":
            return self.ubar * one, 0.0 * one, 0.0 * one
        if self.kind in ("convex_decay", "perturbation"):
            if self.kind == "convex_decay":
                amp, pw = self.a, self.p
            else:
                amp, pw = self.eps / (self.k * (self.k + 1.0)), self.k
            base = (1.0 + x) ** (-pw)
            u = self.ubar + amp * base
            up = -amp * pw * base / (1.0 + x)
            upp = amp * pw * (pw + 1.0) * base / (1.0 + x) ** 2
            return u, up, upp
        sp = self._spline
        return sp(x), sp(x, 1), sp(x, 2)


def validate(profile: UpstreamProfile, claims: str | None = None, x_max: float = 1e3) -> list[str]:
    """Audit the declared hypotheses on a dense grid; return violations.

    claims defaults to the profile kind (tabulated profiles are audited
    against the convex-profile hypotheses unless told otherwise).  This
    reports rather than raises: an empty list means the hypotheses hold.
    """
    if claims is None:
        claims = profile.kind if profile.kind != "tabulated" else "convex_decay"
    if profile.kind == "tabulated":
        x_max = float(profile.table_x[-1])
    x = np.linspace(0.0, x_max, AUDIT_POINTS)
    u, up, upp = profile.eval(x)
    violations = []
    tol = 1e-12 * max(1.0, abs(profile.ubar))
    if np.any(u <= 0.0):
        violations.append("u0 positivity violation")
    if claims == "convex_decay":
        if np.any(upp < -tol):
            violations.append("u0'' sign violation")
        if np.asarray(up).flat[0] > tol:
            violations.append("u0'(0) sign violation")
        scale = np.max(np.abs(up)) + tol
        if abs(np.asarray(up).flat[-1]) > 1e-3 * scale + tol:
            violations.append("u0' decay violation")
    elif claims == "perturbation":
        eps, k = profile.eps, profile.k
        bound1 = eps / (1.0 + x) ** (k + 1.0)
        bound2 = eps / (1.0 + x) ** (k + 2.0)
        slack = 1.0 + 1e-9
        if np.any(np.abs(up) > bound1 * slack + tol):
            violations.append("u0' decay bound violation")
        if np.any(np.abs(upp) > bound2 * slack + tol):
            violations.append("u0'' decay bound violation")
    return violations


class TruncatedProfile:
    """Profile modified for a nozzle of height L, with flux tables.

    u0L agrees with u0 below L-1; above, its slope ramps linearly to zero.
    The cumulative flux integral_0^x2 u0L is tabulated with composite
    Simpson so the streamline coordinate kappa can be inverted quickly.
    """

    def __init__(self, profile: UpstreamProfile, rho0: float, L: float,
                 table_size: int = TABLE_SIZE):
        if not rho0 > 0.0:
            raise ValueError("incoming density rho0 must be positive")
        if not L > 2.0:
            raise ValueError("nozzle height L must exceed 2")
        self.profile = profile
        self.rho0 = float(rho0)
        self.L = float(L)
        u_ref, up_ref, _ = profile.eval(self.L - 1.0)
        self._u_ref = float(u_ref)
        self._up_ref = float(up_ref)

        xs = np.linspace(0.0, self.L, table_size + 1)
        mids = 0.5 * (xs[:-1] + xs[1:])
        u_nodes = self.u0L(xs)[0]
        u_mids = self.u0L(mids)[0]
        if np.min(u_nodes) < 0.5 * profile.ubar:
            raise ValueError("L too small: truncated profile dips below ubar/2")
        h = xs[1] - xs[0]
        increments = h / 6.0 * (u_nodes[:-1] + 4.0 * u_mids + u_nodes[1:])
        self._xs = xs
        self._cum = np.concatenate(([0.0], np.cumsum(increments)))
        self.m_L = self.rho0 * float(self._cum[-1])
        self.u_max = float(np.max(u_nodes))
        self.u_min = float(np.min(u_nodes))
        u0_at_0 = self.u0L(0.0)
        self.F0 = float(u0_at_0[0])
        self.Fp0 = float(u0_at_0[1] / (self.rho0 * u0_at_0[0]))

    def u0L(self, x2):
        """Return (u0L, u0L', u0L'') on [0, L]; closed form on the ramp."""
        x = np.asarray(x2, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        if np.any((x < -1e-12) | (x > self.L * (1.0 + 1e-12))):
            raise ValueError("x2 outside [0, L]")
        x = np.clip(x, 0.0, self.L)
        below = np.minimum(x, self.L - 1.0)
        u, up, upp = self.profile.eval(below)
        u, up, upp = map(np.array, np.broadcast_arrays(u, up, upp))
        ramp = x > self.L - 1.0
        if np.any(ramp):
            tau = x[ramp] - (self.L - 1.0)
            u[ramp] = self._u_ref + self._up_ref * (tau - 0.5 * tau * tau)
            up[ramp] = self._up_ref * (1.0 - tau)
            upp[ramp] = -self._up_ref
        if scalar:
            return u[0], up[0], upp[0]
        return u, up, upp

    def cumflux(self, x2):
        """integral_0^x2 u0L, table lookup plus Simpson on the residual piece."""
        x = np.asarray(x2, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(np.clip(x, 0.0, self.L))
        i = np.clip(np.searchsorted(self._xs, x, side="right") - 1, 0, self._xs.size - 2)
        x_lo = self._xs[i]
        d = x - x_lo
        mid = x_lo + 0.5 * d
        u_lo = self.u0L(x_lo)[0]
        u_mid = self.u0L(mid)[0]
        u_hi = self.u0L(x)[0]
        partial = d / 6.0 * (u_lo + 4.0 * u_mid + u_hi)
        out = self._cum[i] + partial
        return float(out[0]) if scalar else out

    def barpsi(self, x2):
        """Upper barrier rho0 * integral_0^x2 u0L on [0, L]."""
        x = np.asarray(x2, dtype=float)
        if np.any((x < -1e-12) | (x > self.L * (1.0 + 1e-12))):
            raise ValueError("x2 outside [0, L]")
        return self.rho0 * self.cumflux(x)

    def kappa(self, psi):
        """Streamline origin height: the unique kappa with barpsi(kappa) = psi."""
        p = np.asarray(psi, dtype=float)
        scalar = p.ndim == 0
        p = np.atleast_1d(p)
        slack = 1e-9 * self.m_L
        if np.any((p < -slack) | (p > self.m_L + slack)):
            raise ValueError("psi outside [0, m_L]")
        target = np.clip(p, 0.0, self.m_L) / self.rho0
        i = np.clip(np.searchsorted(self._cum, target, side="right") - 1, 0, self._cum.size - 2)
        frac = (target - self._cum[i]) / (self._cum[i + 1] - self._cum[i])
        kap = self._xs[i] + frac * (self._xs[i + 1] - self._xs[i])
        # Two Newton polishes leave the flux residual at rounding level.
        for _ in range(2):
            kap = np.clip(kap - (self.cumflux(kap) - target) / self.u0L(kap)[0], 0.0, self.L)
        return float(kap[0]) if scalar else kap

    def Fcheck(self, psi):
        """Continuous extension of F(psi) = u0L(kappa(psi)) to all real psi."""
        p = np.asarray(psi, dtype=float)
        scalar = p.ndim == 0
        p = np.atleast_1d(p)
        out = np.empty_like(p)
        inside = (p >= 0.0) & (p <= self.m_L)
        if np.any(inside):
            out[inside] = self.u0L(self.kappa(p[inside]))[0]
        above = p > self.m_L
        if np.any(above):
            out[above] = self.u0L(self.L)[0]
        lower = (p < 0.0) & (p >= -1.0)
        if np.any(lower):
            q = p[lower]
            out[lower] = self.F0 + 0.5 * self.Fp0 * (q + 0.5 * q * q)
        tail = p < -1.0
        if np.any(tail):
            # Constant continuation of the quadratic branch (its value at -1).
            out[tail] = self.F0 - 0.25 * self.Fp0
        return float(out[0]) if scalar else out

    def memory_W(self, psi):
        """Memory term W(psi) = F(psi) F'(psi); zero outside the extension."""
        p = np.asarray(psi, dtype=float)
        scalar = p.ndim == 0
        p = np.atleast_1d(p)
        out = np.zeros_like(p)
        inside = (p >= 0.0) & (p <= self.m_L)
        if np.any(inside):
            out[inside] = self.u0L(self.kappa(p[inside]))[1] / self.rho0
        lower = (p < 0.0) & (p >= -1.0)
        if np.any(lower):
            q = p[lower]
            fch = self.F0 + 0.5 * self.Fp0 * (q + 0.5 * q * q)
            out[lower] = fch * 0.5 * self.Fp0 * (1.0 + q)
        return float(out[0]) if scalar else out


def truncate(profile: UpstreamProfile, rho0: float, L: float,
             table_size: int = TABLE_SIZE) -> TruncatedProfile:
    """Modify the profile for a nozzle of height L and build its flux tables."""
    return TruncatedProfile(profile, rho0, L, table_size=table_size)


class Cutoff:
    """Odd C^2 cutoff of the momentum ratio: identity below t0, capped past t1.

    On (t0, t1) the blend is the unique quintic matching value, first and
    second derivative at both ends.  The construction audits monotonicity
    and the derivative bound numerically and rejects threshold triples that
    break them.
    """

    def __init__(self, t0: float = 0.5, t1: float = 0.75, cap: float = 0.625):
        if not (0.0 < t0 < t1 and t0 < cap <= t1):
            raise ValueError(f"invalid cutoff thresholds (t0, t1, cap) = ({t0}, {t1}, {cap})")
        self.t0 = float(t0)
        self.t1 = float(t1)
        self.cap = float(cap)
        width = self.t1 - self.t0
        rise = (self.cap - self.t0) / width
        # q(x) = x + a x^3 + b x^4 + c x^5 with q(1) = rise, q'(1) = 0, q''(1) = 0.
        self._a = 10.0 * rise - 6.0
        self._b = 8.0 - 15.0 * rise
        self._c = 6.0 * rise - 3.0
        x = np.linspace(0.0, 1.0, 2001)
        dq = 1.0 + 3.0 * self._a * x ** 2 + 4.0 * self._b * x ** 3 + 5.0 * self._c * x ** 4
        if np.any(dq < -1e-12) or np.any(dq > 1.2 + 1e-12):
            raise ValueError(
                f"cutoff blend not monotone with derivative in [0, 1.2] for ({t0}, {t1}, {cap})")

    @classmethod
    def from_eps(cls, eps: float) -> "Cutoff":
        """Thresholds (1 - 2 eps, 1 - eps, 1 - 3 eps/2); eps in (0, 1/2)."""
        if not 0.0 < eps < 0.5:
            raise ValueError("cutoff parameter eps must lie in (0, 1/2)")
        return cls(1.0 - 2.0 * eps, 1.0 - eps, 1.0 - 1.5 * eps)

    def __call__(self, s):
        x = np.asarray(s, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        sign = np.sign(x)
        ax = np.abs(x)
        out = np.where(ax <= self.t0, ax, self.cap)
        blend = (ax > self.t0) & (ax < self.t1)
        if np.any(blend):
            z = (ax[blend] - self.t0) / (self.t1 - self.t0)
            q = z + self._a * z ** 3 + self._b * z ** 4 + self._c * z ** 5
            out[blend] = self.t0 + (self.t1 - self.t0) * q
        out = sign * out
        return float(out[0]) if scalar else out

    def __repr__(self):
        return f"Cutoff(t0={self.t0}, t1={self.t1}, cap={self.cap})"
