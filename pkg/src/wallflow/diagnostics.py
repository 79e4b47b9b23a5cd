"""Primitive-variable recovery and the Euler-equivalence checks.

A converged stream function determines the flow through

    rho = H(|grad psi|^2, psi),   u = psi_x2 / rho,   v = -psi_x1 / rho,

and the qualitative theory turns into measurable invariants: the Bernoulli
function equals h(rho0) + F(psi)^2/2 pointwise, omega/rho is conserved
along streamlines and equals -u0L'(kappa(psi))/rho0, the perturbation
psi - barpsi decays in |x1|, and the horizontal velocity is positive away
from wall corners.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import RegularGridInterpolator

from wallflow import gas as gaslib
from wallflow.geometry import corner_cells
from wallflow.solver import FlowState

__all__ = [
    "PrimitiveFields", "Streamline", "primitives", "vorticity_check",
    "trace_streamline", "default_seeds", "farfield_decay", "energy_norms",
    "positivity_and_kutta", "mirror_symmetric_body", "export_csv",
]


@dataclass
class PrimitiveFields:
    """(rho, u, v) and derived scalars on the mesh nodes."""

    state: FlowState
    rho: np.ndarray = field(repr=False)
    u: np.ndarray = field(repr=False)
    v: np.ndarray = field(repr=False)
    mach: np.ndarray = field(repr=False)
    omega: np.ndarray = field(repr=False)
    bernoulli: np.ndarray = field(repr=False)

    @property
    def pressure(self):
        return self.rho ** self.state.setup.gas.gamma


@dataclass
class Streamline:
    """Polyline of one traced streamline with transported samples."""

    seed: tuple
    x1: np.ndarray
    x2: np.ndarray
    bernoulli: np.ndarray
    omega_over_rho: np.ndarray
    complete: bool  # False if u <= 0 stopped the trace early


def primitives(state: FlowState) -> PrimitiveFields:
    """Recover (rho, u, v, mach, omega, B) from the stream function."""
    setup = state.setup
    mesh = state.mesh
    gx, gy = mesh.node_gradient(state.psi)
    rho = setup.density(gx * gx + gy * gy, state.psi, protected=False)
    u = gy / rho
    v = -gx / rho
    speed = np.sqrt(u * u + v * v)
    mach = speed / gaslib.sound_speed(setup.gas, rho)
    v_x1, _ = mesh.node_gradient(v)
    _, u_x2 = mesh.node_gradient(u)
    omega = v_x1 - u_x2
    bern = 0.5 * speed ** 2 + gaslib.enthalpy(setup.gas, rho)
    return PrimitiveFields(state=state, rho=rho, u=u, v=v, mach=mach,
                           omega=omega, bernoulli=bern)


def bernoulli_identity_error(fields: PrimitiveFields) -> float:
    """Max deviation of B from h(rho0) + F(psi)^2/2, relative to the B scale."""
    state = fields.state
    target = state.setup.bernoulli(state.psi)
    scale = float(np.max(np.abs(target)))
    return float(np.max(np.abs(fields.bernoulli - target)) / scale)


def vorticity_check(state: FlowState, margin: int = 5) -> dict:
    """Discrete curl of (u, v) against the transported upstream shear.

    Compares omega = v_x1 - u_x2 with -rho u0L'(kappa(psi))/rho0 on nodes
    at least `margin` cells from every boundary.  The median relative
    error is the headline number; corners pollute the max.
    """
    setup = state.setup
    fields = primitives(state)
    tp = setup.tprofile
    psi_in = np.clip(state.psi, 0.0, tp.m_L)
    expected = -fields.rho * tp.u0L(tp.kappa(psi_in))[1] / tp.rho0
    sl = np.s_[margin:-margin, margin:-margin]
    err = np.abs(fields.omega[sl] - expected[sl])
    scale = float(np.max(np.abs(expected[sl])))
    if scale == 0.0:
        h = max(state.mesh.dxi, state.mesh.deta * state.mesh.L)
        scale = float(np.max(np.abs(fields.u[sl]))) * h / state.mesh.L
    return {
        "median_rel_error": float(np.median(err)) / scale,
        "max_rel_error": float(np.max(err)) / scale,
        "scale": scale,
    }


def _field_interpolators(fields: PrimitiveFields):
    mesh = fields.state.mesh
    grids = (mesh.xi, mesh.eta)
    def make(arr):
        return RegularGridInterpolator(grids, arr, bounds_error=False, fill_value=None)
    return make(fields.u), make(fields.v), make(fields.bernoulli), \
        make(fields.state.psi)


def default_seeds(state: FlowState, count: int = 10):
    """Equispaced seed heights on the inflow side, one cell in from the edge."""
    mesh = state.mesh
    x1 = mesh.xi[0] + 1.0
    heights = [(j / (count + 1)) * mesh.L for j in range(1, count + 1)]
    return [(x1, h) for h in heights]


def trace_streamline(fields: PrimitiveFields, seed, n_samples: int = 200,
                     rtol: float = 1e-8) -> Streamline:
    """Integrate dx2/dx1 = v/u across the domain, sampling B and omega/rho.

    The tracer follows the recovered velocity field; the samples come from
    quantities conserved along exact streamlines (the Bernoulli field, and
    the scaled vorticity through its transported form -u0L'(kappa(psi))/rho0
    with psi interpolated at the traced points), so their drift measures
    how well the traced line follows the flow.
    """
    state = fields.state
    setup = state.setup
    mesh = state.mesh
    u_of, v_of, b_of, psi_of = _field_interpolators(fields)

    def to_comp(x1, x2):
        eta = np.clip(mesh.eta_of(x1, x2), 0.0, 1.0)
        return np.array([np.clip(x1, mesh.xi[0], mesh.xi[-1]), eta])

    def rhs(x1, y):
        pt = to_comp(x1, y[0])
        return [v_of(pt)[0] / u_of(pt)[0]]

    def stalled(x1, y):
        return u_of(to_comp(x1, y[0]))[0]
    stalled.terminal = True
    stalled.direction = -1

    x_eval = np.linspace(seed[0], mesh.xi[-1], n_samples)
    sol = solve_ivp(rhs, (seed[0], mesh.xi[-1]), [seed[1]], t_eval=x_eval,
                    rtol=rtol, atol=1e-10 * mesh.L, events=stalled, method="RK45")
    x1 = sol.t
    x2 = sol.y[0]
    pts = np.array([to_comp(a, b) for a, b in zip(x1, x2)])
    tp = setup.tprofile
    psi_line = np.clip(psi_of(pts), 0.0, tp.m_L)
    omega_over_rho = -tp.u0L(tp.kappa(psi_line))[1] / tp.rho0
    return Streamline(seed=tuple(seed), x1=x1, x2=x2,
                      bernoulli=b_of(pts), omega_over_rho=omega_over_rho,
                      complete=bool(sol.status == 0))


def farfield_decay(state: FlowState, fractions=(0.25, 0.5, 0.75)) -> list[dict]:
    """Lateral-slab sups of the deviation from the upstream state.

    For |xi| at the given fractions of N, reports sup over x2 of
    |psi - barpsi|, |grad(psi - barpsi)|, |rho - rho0|, |v|.
    """
    setup = state.setup
    mesh = state.mesh
    fields = primitives(state)
    barpsi = setup.barpsi_nodes()
    dev = state.psi - barpsi
    gx, gy = mesh.node_gradient(state.psi)
    u0 = setup.tprofile.u0L(mesh.X2)[0]
    gdev = np.sqrt(gx ** 2 + (gy - setup.rho0 * u0) ** 2)
    rows = []
    for frac in fractions:
        target = frac * mesh.N
        cols = [int(np.argmin(np.abs(mesh.xi - s * target))) for s in (-1.0, 1.0)]
        rows.append({
            "abs_xi": target,
            "sup_psi_dev": float(max(np.max(np.abs(dev[c, :])) for c in cols)),
            "sup_grad_dev": float(max(np.max(gdev[c, :]) for c in cols)),
            "sup_rho_dev": float(max(np.max(np.abs(fields.rho[c, :] - setup.rho0)) for c in cols)),
            "sup_v": float(max(np.max(np.abs(fields.v[c, :])) for c in cols)),
        })
    return rows


def energy_norms(state: FlowState) -> tuple[float, float]:
    """(||grad(psi - barpsi)||_L2^2, ||(rho u - rho0 u0L, rho v)||_L2^2)."""
    setup = state.setup
    mesh = state.mesh
    areas = mesh.cell_areas()
    gx, gy = mesh.cell_gradient(state.psi)
    x2_c = mesh.cell_average(mesh.X2)
    mom0 = setup.rho0 * setup.tprofile.u0L(x2_c)[0]
    bar_gx, bar_gy = 0.0, mom0
    grad_energy = float(np.sum(((gx - bar_gx) ** 2 + (gy - bar_gy) ** 2) * areas))
    # (rho u, rho v) = (psi_x2, -psi_x1), so the momentum deviation needs no density.
    mom_energy = float(np.sum(((gy - mom0) ** 2 + gx ** 2) * areas))
    return grad_energy, mom_energy


def positivity_and_kutta(state: FlowState, margin: int = 3) -> dict:
    """Min horizontal velocity away from corners, and the corner speeds."""
    fields = primitives(state)
    mesh = state.mesh
    keep = np.ones(mesh.shape, dtype=bool)
    corner_sets = corner_cells(mesh)
    for nodes in corner_sets:
        for (i, j) in nodes:
            keep[i, j] = False
    min_u = float(np.min(fields.u[keep]))
    speeds = []
    for (cx, cy) in mesh.wall.corners:
        i = int(np.argmin(np.abs(mesh.xi - cx)))
        speed = float(np.hypot(fields.u[i, 0], fields.v[i, 0]))
        speeds.append(speed)
    return {"min_interior_u": min_u, "corner_speeds": speeds}


def mirror_symmetric_body(fields: PrimitiveFields) -> dict:
    """Reflect the half-plane flow across x2 = 0 for the symmetric body.

    (rho, u) extend evenly, v oddly; export-only arrays, wall row shared.
    """
    def even(arr):
        return np.concatenate([arr[:, :0:-1], arr], axis=1)

    def odd(arr):
        return np.concatenate([-arr[:, :0:-1], arr], axis=1)

    mesh = fields.state.mesh
    return {
        "x1": even(mesh.X1),
        "x2": odd(mesh.X2),
        "rho": even(fields.rho),
        "u": even(fields.u),
        "v": odd(fields.v),
        "psi": odd(fields.state.psi),
    }


def export_csv(state: FlowState, path) -> None:
    """Node fields as CSV, row-major by eta then xi, 12 significant digits."""
    fields = primitives(state)
    mesh = state.mesh
    cols = [mesh.X1, mesh.X2, state.psi, fields.rho, fields.u, fields.v,
            fields.mach, fields.omega]
    with open(path, "w", newline="") as handle:
        handle.write("x1,x2,psi,rho,u,v,mach,omega\n")
        for j in range(mesh.ny + 1):
            for i in range(mesh.nx + 1):
                handle.write(",".join(f"{c[i, j]:.12g}" for c in cols) + "\n")
