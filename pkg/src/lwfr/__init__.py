"""Single-stage Lax-Wendroff flux reconstruction solver for 2-D compressible
Euler on curvilinear quadtree meshes, with subcell blending, positivity
preservation, mortar-coupled AMR, and embedded-error adaptive time stepping."""

from .basis import Basis
from .cases import CASE_NAMES, make_case
from .equations import Euler
from .mesh import Mesh, build_faces, build_geometry, make_mesh
from .solver import Solver
from .timestep import PIDController, effective_cfl, stable_dt

__all__ = [
    "Basis",
    "CASE_NAMES",
    "Euler",
    "Mesh",
    "PIDController",
    "Solver",
    "build_faces",
    "build_geometry",
    "effective_cfl",
    "make_case",
    "make_mesh",
    "stable_dt",
]

__version__ = "0.1.0"
