"""Wall shapes and the sheared body-fitted mesh over the truncated domain.

The wall is a graph x2 = f(x1) with f >= 0 supported on [0, 1] (or several
disjoint intervals).  The computational domain {f < x2 < L, |x1| <= N} is
mapped onto the rectangle (xi, eta) in [-N, N] x [0, 1] by

    x1 = xi,    x2 = f(xi) + eta (L - f(xi)),

so mesh lines conform to the wall (eta = 0) and the top (eta = 1).  The
inverse-map factors needed for physical gradients are

    d eta / d x2 = 1 / (L - f),    d eta / d x1 = -f'(xi) (1 - eta) / (L - f).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

__all__ = ["WallShape", "Mesh", "build_mesh", "corner_cells"]

WALL_KINDS = ("flat", "smooth_bump", "corner_bump", "multi_bump")

# Relative width of the quadratic cap replacing the tent apex, in units of
# the support half-width.  Only x1 = 0 and x1 = 1 remain genuine corners.
_TENT_SMOOTHING = 0.5


@dataclass(frozen=True)
class WallShape:
    """Nonnegative wall profile f(x1), zero outside its supports."""

    kind: str
    height: float = 0.0
    supports: tuple = ((0.0, 1.0),)
    table_x: np.ndarray | None = field(default=None, repr=False)
    table_f: np.ndarray | None = field(default=None, repr=False)
    _pchip: PchipInterpolator | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in WALL_KINDS:
            raise ValueError(f"unknown wall kind {self.kind!r}")
        if self.kind != "flat" and self.height <= 0.0:
            raise ValueError("bump height must be positive")
        sup = tuple(tuple(map(float, s)) for s in self.supports)
        object.__setattr__(self, "supports", sup)
        for lo, hi in sup:
            if not hi > lo:
                raise ValueError("support interval must be nondegenerate")
        ordered = sorted(sup)
        for (a0, b0), (a1, _) in zip(ordered, ordered[1:]):
            if a1 < b0:
                raise ValueError("bump supports must be disjoint")
        if self.table_x is not None:
            x = np.asarray(self.table_x, dtype=float)
            fvals = np.asarray(self.table_f, dtype=float)
            if np.any(fvals < 0.0):
                raise ValueError("wall profile must be nonnegative")
            object.__setattr__(self, "table_x", x)
            object.__setattr__(self, "table_f", fvals)
            object.__setattr__(self, "_pchip", PchipInterpolator(x, fvals))
            object.__setattr__(self, "supports", ((float(x[0]), float(x[-1])),))
            object.__setattr__(self, "height", float(np.max(fvals)))

    @classmethod
    def flat(cls) -> "WallShape":
        return cls(kind="flat")

    @classmethod
    def smooth_bump(cls, height: float, support=(0.0, 1.0)) -> "WallShape":
        return cls(kind="smooth_bump", height=height, supports=(tuple(support),))

    @classmethod
    def corner_bump(cls, height: float, support=(0.0, 1.0)) -> "WallShape":
        return cls(kind="corner_bump", height=height, supports=(tuple(support),))

    @classmethod
    def multi_bump(cls, height: float, supports) -> "WallShape":
        return cls(kind="multi_bump", height=height, supports=tuple(tuple(s) for s in supports))

    @classmethod
    def from_csv(cls, path) -> "WallShape":
        """Two-column CSV (x1, f) with a header line; monotone interpolation."""
        with open(path, newline="") as handle:
            rows = list(csv.reader(handle))
        data = np.array([[float(r[0]), float(r[1])] for r in rows[1:]])
        return cls(kind="smooth_bump", height=float(np.max(data[:, 1])),
                   table_x=data[:, 0], table_f=data[:, 1])

    @property
    def J(self) -> float:
        """Max wall height (0 for a flat wall)."""
        if self.kind == "flat":
            return 0.0
        if self.table_x is not None:
            return float(np.max(self.table_f))
        if self.kind == "corner_bump":
            return self.height
        return self.height

    @property
    def corners(self):
        """Genuine corner points of the wall arc (corner_bump only)."""
        if self.kind != "corner_bump":
            return ()
        lo, hi = self.supports[0]
        return ((lo, 0.0), (hi, 0.0))

    def _bump_unit(self, t):
        """Profile on the unit support coordinate t in [0, 1], peak 1."""
        z = 2.0 * t - 1.0
        if self.kind in ("smooth_bump", "multi_bump"):
            inner = 1.0 - z * z
            safe = inner > 1e-9
            out = np.zeros_like(t)
            out[safe] = np.exp(1.0 - 1.0 / inner[safe])
            return out
        # corner_bump: tent 1 - |z| with a quadratic cap, renormalized to 1
        z0 = _TENT_SMOOTHING
        az = np.abs(z)
        tent = 1.0 - az
        capped = 1.0 - 0.5 * z0 - z * z / (2.0 * z0)
        return np.where(az < z0, capped, tent) / (1.0 - 0.5 * z0)

    def _bump_unit_slope(self, t):
        z = 2.0 * t - 1.0
        if self.kind in ("smooth_bump", "multi_bump"):
            inner = 1.0 - z * z
            safe = inner > 1e-9
            out = np.zeros_like(t)
            out[safe] = np.exp(1.0 - 1.0 / inner[safe]) * (-2.0 * z[safe]) / inner[safe] ** 2
            return 2.0 * out  # d z / d t = 2
        z0 = _TENT_SMOOTHING
        az = np.abs(z)
        slope = np.where(az < z0, -z / z0, -np.sign(z))
        return 2.0 * slope / (1.0 - 0.5 * z0)

    def f(self, x1):
        """Wall height at x1."""
        x = np.asarray(x1, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        if self._pchip is not None:
            lo, hi = self.supports[0]
            out = np.zeros_like(x)
            inside = (x >= lo) & (x <= hi)
            out[inside] = np.maximum(self._pchip(x[inside]), 0.0)
            return float(out[0]) if scalar else out
        out = np.zeros_like(x)
        if self.kind != "flat":
            for lo, hi in self.supports:
                inside = (x > lo) & (x < hi)
                t = (x[inside] - lo) / (hi - lo)
                out[inside] = self.height * self._bump_unit(t)
        return float(out[0]) if scalar else out

    def fprime(self, x1):
        """Wall slope at x1 (one-sided limits at corner points)."""
        x = np.asarray(x1, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        if self._pchip is not None:
            lo, hi = self.supports[0]
            out = np.zeros_like(x)
            inside = (x >= lo) & (x <= hi)
            out[inside] = self._pchip.derivative()(x[inside])
            return float(out[0]) if scalar else out
        out = np.zeros_like(x)
        if self.kind != "flat":
            for lo, hi in self.supports:
                inside = (x > lo) & (x < hi)
                t = (x[inside] - lo) / (hi - lo)
                out[inside] = self.height * self._bump_unit_slope(t) / (hi - lo)
        return float(out[0]) if scalar else out


@dataclass
class Mesh:
    """Sheared body-fitted grid with metric factors, nodes indexed [i, j]."""

    wall: WallShape
    L: float
    N: float
    nx: int  # cells along xi
    ny: int  # cells along eta
    xi: np.ndarray = field(repr=False, default=None)
    eta: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        J = self.wall.J
        if not self.L > J + 1.0:
            raise ValueError(f"top height L = {self.L} must exceed wall height + 1 = {J + 1.0}")
        if self.N < 4.0:
            raise ValueError("lateral half-width N must be at least 4")
        if self.nx < 16 or self.ny < 16:
            raise ValueError("need at least 16 cells in each direction")
        self.xi = np.linspace(-self.N, self.N, self.nx + 1)
        self.eta = np.linspace(0.0, 1.0, self.ny + 1)
        self.dxi = self.xi[1] - self.xi[0]
        self.deta = self.eta[1] - self.eta[0]
        self.f_n = self.wall.f(self.xi)
        self.fp_n = self.wall.fprime(self.xi)
        self.jac_n = self.L - self.f_n
        if np.any(self.jac_n <= 0.0):
            raise ValueError("degenerate mesh: wall reaches the top boundary")
        xi_c = 0.5 * (self.xi[:-1] + self.xi[1:])
        self.eta_c = 0.5 * (self.eta[:-1] + self.eta[1:])
        self.f_c = self.wall.f(xi_c)
        self.fp_c = self.wall.fprime(xi_c)
        self.jac_c = self.L - self.f_c
        self.xi_c = xi_c
        self.X1 = np.broadcast_to(self.xi[:, None], (self.nx + 1, self.ny + 1)).copy()
        self.X2 = self.f_n[:, None] + self.eta[None, :] * self.jac_n[:, None]

    @property
    def shape(self):
        return (self.nx + 1, self.ny + 1)

    @property
    def n_nodes(self):
        return (self.nx + 1) * (self.ny + 1)

    def x2_of(self, xi, eta):
        f = self.wall.f(xi)
        return f + eta * (self.L - f)

    def eta_of(self, x1, x2):
        f = self.wall.f(x1)
        return (x2 - f) / (self.L - f)

    def node_gradient(self, field2d):
        """Physical gradient (d/dx1, d/dx2) of a node field, 2nd order."""
        p_xi, p_eta = np.gradient(field2d, self.dxi, self.deta, edge_order=2)
        inv_jac = 1.0 / self.jac_n[:, None]
        detadx1 = -self.fp_n[:, None] * (1.0 - self.eta[None, :]) * inv_jac
        return p_xi + p_eta * detadx1, p_eta * inv_jac

    def cell_average(self, field2d):
        return 0.25 * (field2d[:-1, :-1] + field2d[1:, :-1] + field2d[:-1, 1:] + field2d[1:, 1:])

    def cell_gradient(self, field2d):
        """Physical gradient at cell centers from face-averaged differences."""
        p_xi = (field2d[1:, :-1] - field2d[:-1, :-1] + field2d[1:, 1:] - field2d[:-1, 1:]) / (2.0 * self.dxi)
        p_eta = (field2d[:-1, 1:] - field2d[:-1, :-1] + field2d[1:, 1:] - field2d[1:, :-1]) / (2.0 * self.deta)
        inv_jac = 1.0 / self.jac_c[:, None]
        detadx1 = -self.fp_c[:, None] * (1.0 - self.eta_c[None, :]) * inv_jac
        return p_xi + p_eta * detadx1, p_eta * inv_jac

    def cell_areas(self):
        """Physical cell areas (exact for the shear map)."""
        return np.broadcast_to((self.dxi * self.deta) * self.jac_c[:, None],
                               (self.nx, self.ny)).copy()

    def area(self) -> float:
        return float(np.sum(self.cell_areas()))


def build_mesh(wall: WallShape, L: float, N: float, nx: int, ny: int) -> Mesh:
    """Uniform (xi, eta) grid over [-N, N] x [0, 1] conforming to the wall."""
    return Mesh(wall=wall, L=float(L), N=float(N), nx=int(nx), ny=int(ny))


def corner_cells(mesh: Mesh):
    """Node index sets within 3 cell widths of each wall corner point.

    Empty for walls without genuine corners.
    """
    corners = mesh.wall.corners
    if not corners:
        return []
    radius = 3.0 * max(mesh.dxi, mesh.deta * mesh.L)
    sets = []
    for (cx, cy) in corners:
        dist_sq = (mesh.X1 - cx) ** 2 + (mesh.X2 - cy) ** 2
        ii, jj = np.nonzero(dist_sq <= radius * radius)
        sets.append(list(zip(ii.tolist(), jj.tolist())))
    return sets
