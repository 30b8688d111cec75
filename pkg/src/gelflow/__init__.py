"""Finite element simulation of gel swelling dynamics with a decoupled
Stokes/diffusion time-stepping scheme."""
from .errors import (ConfigError, GelflowError, IncompatibilityError, InvalidParameterError, MeshError,
                     SolverError)
from .mesh import Mesh, gen_ellipse_mesh, gen_rect_mesh, mesh_size, read_mesh, refine_uniform, write_mesh
from .model import BoundaryLoad, InitialData, MaterialParams, compute_conserved, derive_params
from .scheme import Discretization, MeshConstraintWarning, SimulationSetup, run

__version__ = "0.1.0"

__all__ = [
    "BoundaryLoad", "ConfigError", "Discretization", "GelflowError", "IncompatibilityError", "InitialData",
    "InvalidParameterError", "MaterialParams", "Mesh", "MeshConstraintWarning", "MeshError",
    "SimulationSetup", "SolverError", "compute_conserved", "derive_params", "gen_ellipse_mesh",
    "gen_rect_mesh", "mesh_size", "read_mesh", "refine_uniform", "run", "write_mesh",
]
