"""Steady subsonic compressible flow past a wall, computed from a stream function.

The package solves the two-dimensional steady Euler system for a polytropic
gas (p = rho^gamma) above a wall x2 = f(x1) with a localized bump.  The
incoming flow is a shear profile u0(x2) with density rho0; the hyperbolic
modes collapse into one quasilinear elliptic equation for the stream
function whose right-hand side carries the upstream vorticity along
streamlines.  A truncated nozzle domain, a subsonic momentum cutoff, and a
Picard outer iteration make the problem computable; barrier functions,
transport invariants, and a density continuation make the qualitative
theory checkable.
"""

from wallflow.gas import (BernoulliEnvelope, GasLaw, enthalpy, envelope,
                          invert_bernoulli, sound_speed)
from wallflow.geometry import Mesh, WallShape, build_mesh, corner_cells
from wallflow.upstream import Cutoff, TruncatedProfile, UpstreamProfile, truncate, validate
from wallflow.farfield import FarfieldTriple, solve_triple, verify_triple
from wallflow.solver import (FlowState, PicardDivergence, ProblemSetup, SolveReport,
                             certify, check_bounds, make_setup, picard_solve)

__all__ = [
    "GasLaw", "BernoulliEnvelope", "enthalpy", "sound_speed", "envelope", "invert_bernoulli",
    "UpstreamProfile", "TruncatedProfile", "Cutoff", "truncate", "validate",
    "WallShape", "Mesh", "build_mesh", "corner_cells",
    "FarfieldTriple", "solve_triple", "verify_triple",
    "ProblemSetup", "FlowState", "SolveReport", "PicardDivergence",
    "make_setup", "picard_solve", "certify", "check_bounds",
]

__version__ = "0.1.0"
