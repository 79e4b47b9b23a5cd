"""Picard outer iteration for the truncated stream-function problem.

Each outer step freezes the density map and the memory term at the current
iterate psi_k and solves the linear conservative problem

    div( sigma grad psi ) = r,      sigma = 1 / H_trunc(|grad psi_k|^2, psi_k),
                                    r = W(psi_k) H_trunc(|grad psi_k|^2, psi_k),

with psi = 0 on the wall, psi = m_L on top, and psi = barpsi(x2) on the
lateral edges.  H_trunc composes the Bernoulli inversion with the momentum
cutoff, so the inversion never sees supersonic momentum even for bad
iterates.  The discretization is bilinear Galerkin on the sheared mesh with
coefficients frozen per cell; the resulting nine-point system is symmetric
positive definite after Dirichlet elimination and is solved by sparse
factorization (the contract is the relative residual, not the method).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from wallflow import gas as gaslib
from wallflow.gas import GasLaw
from wallflow.geometry import Mesh, WallShape, build_mesh
from wallflow.upstream import Cutoff, TruncatedProfile, UpstreamProfile, truncate

__all__ = [
    "ProblemSetup", "FlowState", "SolveReport", "LinearSystem", "PicardDivergence",
    "make_setup", "assemble", "linear_solve", "picard_solve", "certify", "check_bounds",
]

# Bilinear element matrices on a reference rectangle, local node order
# (0,0), (1,0), (0,1), (1,1).  S_xx carries b/(6a), S_yy a/(6b), S_xy 1/4.
_SXX = np.array([[2, -2, 1, -1], [-2, 2, -1, 1], [1, -1, 2, -2], [-1, 1, -2, 2]], dtype=float) / 6.0
_SYY = np.array([[2, 1, -2, -1], [1, 2, -1, -2], [-2, -1, 2, 1], [-1, -2, 1, 2]], dtype=float) / 6.0
_sx = np.array([-1.0, 1.0, -1.0, 1.0])
_sy = np.array([-1.0, -1.0, 1.0, 1.0])
_SXY = 0.25 * (np.outer(_sx, _sy) + np.outer(_sy, _sx))


class PicardDivergence(RuntimeError):
    """Raised when the outer iteration hits its cap; carries diagnostics."""

    def __init__(self, message, state=None, report=None):
        super().__init__(message)
        self.state = state
        self.report = report


@dataclass
class ProblemSetup:
    """Everything a solve needs: gas, truncated profile, wall, mesh, cutoff."""

    gas: GasLaw
    tprofile: TruncatedProfile
    wall: WallShape
    mesh: Mesh
    cutoff: Cutoff

    def __post_init__(self):
        g = self.gas.gamma
        self.rho0_star = (self.tprofile.u_max ** 2 / g) ** (1.0 / (g - 1.0))
        if not self.tprofile.rho0 > self.rho0_star:
            raise ValueError(
                f"upstream not subsonic: rho0 = {self.tprofile.rho0} "
                f"<= rho0* = {self.rho0_star:.6g}")
        if not self.mesh.L > self.wall.J + 2.0:
            raise ValueError("top height L must exceed wall height + 2")

    @property
    def rho0(self) -> float:
        return self.tprofile.rho0

    @property
    def m_L(self) -> float:
        return self.tprofile.m_L

    def bernoulli(self, psi):
        """Extended Bernoulli value along streamlines: h(rho0) + F(psi)^2 / 2."""
        h0 = gaslib.enthalpy(self.gas, self.rho0)
        f = self.tprofile.Fcheck(psi)
        return h0 + 0.5 * f * f

    def density(self, grad_sq, psi, protected: bool = True):
        """Density from the Bernoulli inversion of the momentum.

        protected=True composes with the cutoff (the map the iteration
        uses); protected=False inverts the raw momentum, clamped at the
        sonic value, which is exact wherever the state is subsonic.
        """
        bern = self.bernoulli(psi)
        sig = gaslib.sigma_crit(self.gas, bern)
        if protected:
            ratio = np.sqrt(np.maximum(grad_sq, 0.0)) / sig
            m_sq = (self.cutoff(ratio) * sig) ** 2
        else:
            m_sq = np.minimum(np.maximum(grad_sq, 0.0), sig * sig)
        return gaslib.invert_bernoulli(self.gas, m_sq, bern)

    def momentum_ratio(self, grad_sq, psi):
        """|grad psi| / Sigma(B(psi)), the quantity the cutoff watches."""
        sig = gaslib.sigma_crit(self.gas, self.bernoulli(psi))
        return np.sqrt(np.maximum(grad_sq, 0.0)) / sig

    def barpsi_nodes(self):
        """Upper barrier transplanted through the mesh map to the nodes."""
        return self.rho0 * self.tprofile.cumflux(self.mesh.X2)

    def boundary_values(self):
        """Dirichlet data on all four edges (wall, top, lateral)."""
        mesh = self.mesh
        vals = np.full(mesh.shape, np.nan)
        vals[:, 0] = 0.0
        vals[:, -1] = self.m_L
        for i in (0, -1):
            vals[i, :] = self.rho0 * self.tprofile.cumflux(mesh.X2[i, :])
        vals[0, 0] = vals[-1, 0] = 0.0
        vals[0, -1] = vals[-1, -1] = self.m_L
        return vals


def make_setup(gas: GasLaw, profile: UpstreamProfile, wall: WallShape, rho0: float,
               L: float, N: float, nx: int, ny: int,
               cutoff: Cutoff | None = None) -> ProblemSetup:
    """Truncate the profile, build the mesh, and bundle a solvable setup."""
    tp = truncate(profile, rho0, L)
    mesh = build_mesh(wall, L, N, nx, ny)
    return ProblemSetup(gas=gas, tprofile=tp, wall=wall, mesh=mesh,
                        cutoff=cutoff if cutoff is not None else Cutoff())


@dataclass
class FlowState:
    """Converged (or best-effort) stream function on the mesh."""

    setup: ProblemSetup
    psi: np.ndarray
    iterations: int = 0
    update_norm: float = np.inf
    linear_residual: float = np.inf
    converged: bool = False

    @property
    def mesh(self) -> Mesh:
        return self.setup.mesh

    def node_density(self):
        """Density at nodes (exact subsonic inversion, sonic-clamped)."""
        gx, gy = self.mesh.node_gradient(self.psi)
        return self.setup.density(gx * gx + gy * gy, self.psi, protected=False)


@dataclass
class SolveReport:
    """Convergence and certification record of one solve."""

    iterations: int
    update_norm: float
    linear_residual: float
    converged: bool
    M_ratio: float = np.nan
    truncation_active: bool = True
    max_mach: float = np.nan
    min_density: float = np.nan
    wall_corner_speed: float = np.nan
    bound_violations: dict = field(default_factory=dict)

    def lines(self):
        out = [
            f"iterations: {self.iterations}",
            f"update_norm: {self.update_norm:.6g}",
            f"linear_residual: {self.linear_residual:.6g}",
            f"converged: {str(self.converged).lower()}",
            f"M_ratio: {self.M_ratio:.12g}",
            f"truncation_active: {str(self.truncation_active).lower()}",
            f"max_mach: {self.max_mach:.12g}",
            f"min_density: {self.min_density:.12g}",
        ]
        if np.isfinite(self.wall_corner_speed):
            out.append(f"wall_corner_speed: {self.wall_corner_speed:.6g}")
        for key, val in self.bound_violations.items():
            out.append(f"{key}: {val:.6g}")
        return out


@dataclass
class LinearSystem:
    """Dirichlet-eliminated SPD system with scatter info back to the grid."""

    A: sp.csr_matrix
    b: np.ndarray
    free: np.ndarray
    shape: tuple
    values: np.ndarray  # full node vector with Dirichlet data filled


def _cell_coefficients(setup: ProblemSetup, psi):
    """Frozen sigma and right-hand side at cell centers."""
    mesh = setup.mesh
    gx, gy = mesh.cell_gradient(psi)
    psi_c = mesh.cell_average(psi)
    rho = setup.density(gx * gx + gy * gy, psi_c)
    sigma = 1.0 / rho
    rhs = setup.tprofile.memory_W(psi_c) * rho
    return sigma, rhs


def assemble(setup: ProblemSetup, psi) -> LinearSystem:
    """Nine-point conservative system with coefficients frozen at psi."""
    mesh = setup.mesh
    if not np.all(np.isfinite(psi)):
        raise RuntimeError("state corrupt: non-finite stream function iterate")
    sigma, rhs = _cell_coefficients(setup, psi)
    if not (np.all(np.isfinite(sigma)) and np.all(np.isfinite(rhs))):
        raise RuntimeError("state corrupt: non-finite frozen coefficients")

    a, b = mesh.dxi, mesh.deta
    jac = mesh.jac_c[:, None]
    slope = mesh.fp_c[:, None] * (1.0 - mesh.eta_c[None, :])
    k11 = sigma * jac * (b / a)
    k12 = -sigma * slope
    k22 = sigma * (1.0 + slope * slope) / jac * (a / b)

    n_cells = mesh.nx * mesh.ny
    ke = (k11.reshape(n_cells, 1, 1) * _SXX[None, :, :]
          + k12.reshape(n_cells, 1, 1) * _SXY[None, :, :]
          + k22.reshape(n_cells, 1, 1) * _SYY[None, :, :])

    ny1 = mesh.ny + 1
    ii, jj = np.meshgrid(np.arange(mesh.nx), np.arange(mesh.ny), indexing="ij")
    base = ii.ravel() * ny1 + jj.ravel()
    corners = np.stack([base, base + ny1, base + 1, base + ny1 + 1], axis=1)

    rows = np.repeat(corners, 4, axis=1).ravel()
    cols = np.tile(corners, (1, 4)).ravel()
    A = sp.coo_matrix((ke.ravel(), (rows, cols)),
                      shape=(mesh.n_nodes, mesh.n_nodes)).tocsr()

    load = np.zeros(mesh.n_nodes)
    cell_load = -(rhs * jac).ravel() * (a * b / 4.0)
    for corner in range(4):
        np.add.at(load, corners[:, corner], cell_load)

    values = setup.boundary_values()
    dirichlet = np.zeros(mesh.shape, dtype=bool)
    dirichlet[:, 0] = dirichlet[:, -1] = True
    dirichlet[0, :] = dirichlet[-1, :] = True
    mask = dirichlet.ravel()
    free = np.flatnonzero(~mask)
    fixed = np.flatnonzero(mask)

    full = np.where(mask, values.ravel(), 0.0)
    b_free = load[free] - A[free][:, fixed] @ full[fixed]
    A_free = A[free][:, free]
    return LinearSystem(A=A_free, b=b_free, free=free, shape=mesh.shape, values=full)


def linear_solve(system: LinearSystem, lin_tol: float = 1e-10):
    """Solve the eliminated system; contract is the relative residual."""
    x = spla.spsolve(system.A.tocsc(), system.b)
    if not np.all(np.isfinite(x)):
        raise RuntimeError("linear solve failed: non-finite solution")
    b_norm = np.linalg.norm(system.b)
    residual = np.linalg.norm(system.A @ x - system.b) / max(b_norm, 1e-300)
    if residual > lin_tol:
        raise RuntimeError(f"linear solve failed: relative residual {residual:.3g}")
    full = system.values.copy()
    full[system.free] = x
    return full.reshape(system.shape), residual


def picard_solve(setup: ProblemSetup, psi_init=None, *, theta: float = 0.7,
                 picard_tol: float = 1e-9, lin_tol: float = 1e-10,
                 max_iters: int = 500) -> tuple[FlowState, SolveReport]:
    """Relaxed fixed-point iteration on the frozen-coefficient problem.

    Stops when the sup-norm update falls below picard_tol * m_L.  The
    relaxation is halved (at most three times) whenever the update norm
    grows, which keeps near-critical runs damped.  Divergence raises
    PicardDivergence carrying the best-effort state for diagnostics.
    """
    mesh = setup.mesh
    if psi_init is None:
        psi = setup.barpsi_nodes()
    else:
        psi = np.array(psi_init, dtype=float)
        if psi.shape != mesh.shape:
            raise ValueError(f"psi_init shape {psi.shape} != mesh shape {mesh.shape}")
        bvals = setup.boundary_values()
        edge = ~np.isnan(bvals)
        if not np.allclose(psi[edge], bvals[edge], atol=1e-9 * setup.m_L):
            raise ValueError("psi_init does not satisfy the boundary values")
        psi[edge] = bvals[edge]

    tol = picard_tol * setup.m_L
    prev_update = np.inf
    halvings = 0
    residual = np.inf
    for it in range(1, max_iters + 1):
        system = assemble(setup, psi)
        target, residual = linear_solve(system, lin_tol=lin_tol)
        step = target - psi
        update = float(np.max(np.abs(step)))
        psi = psi + theta * step
        if theta * update <= tol or update <= tol:
            state = FlowState(setup=setup, psi=psi, iterations=it,
                              update_norm=update, linear_residual=residual,
                              converged=True)
            report = certify(state)
            return state, report
        if update > prev_update and halvings < 3:
            theta *= 0.5
            halvings += 1
        prev_update = update

    state = FlowState(setup=setup, psi=psi, iterations=max_iters,
                      update_norm=prev_update, linear_residual=residual,
                      converged=False)
    report = certify(state)
    raise PicardDivergence(
        f"no convergence in {max_iters} Picard iterations "
        f"(last update {prev_update:.3g}, tolerance {tol:.3g})",
        state=state, report=report)


def certify(state: FlowState) -> SolveReport:
    """Nodal subsonic certificate: M_ratio, cutoff activity, Mach check.

    If M_ratio stays at or below the identity threshold t0 the cutoff never
    acted on the converged state, so psi also solves the untruncated
    problem discretely.
    """
    setup = state.setup
    gx, gy = state.mesh.node_gradient(state.psi)
    grad_sq = gx * gx + gy * gy
    ratio = setup.momentum_ratio(grad_sq, state.psi)
    m_ratio = float(np.max(ratio))
    rho = setup.density(grad_sq, state.psi, protected=False)
    speed_sq = grad_sq / (rho * rho)
    mach = np.sqrt(speed_sq) / gaslib.sound_speed(setup.gas, rho)
    return SolveReport(
        iterations=state.iterations,
        update_norm=state.update_norm,
        linear_residual=state.linear_residual,
        converged=state.converged,
        M_ratio=m_ratio,
        truncation_active=bool(m_ratio > setup.cutoff.t0),
        max_mach=float(np.max(mach)),
        min_density=float(np.min(rho)),
    )


def check_bounds(state: FlowState, triple=None) -> dict:
    """Positive parts of the barrier violations (all ~0 for a good solve).

    max_pos(psi - barpsi) audits the upper barrier, max_pos(psihat - psi)
    on {x2 >= J} the lower one, and max_pos(-psi) plain nonnegativity.
    """
    setup = state.setup
    mesh = state.mesh
    psi = state.psi
    barpsi = setup.barpsi_nodes()
    out = {
        "max_pos_psi_minus_barpsi": float(np.max(psi - barpsi)),
        "max_neg_psi": float(np.max(-psi)),
    }
    if triple is not None:
        region = mesh.X2 >= triple.J
        gap = triple.psihat(mesh.X2[region]) - psi[region]
        out["max_pos_psihat_minus_psi"] = float(np.max(gap))
    return out
