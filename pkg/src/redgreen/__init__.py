"""Red-green refinement of tetrahedral meshes and multilevel preconditioners."""
from .kernels import BACKEND
from .mesh import Hierarchy, build_initial_mesh
from .refine import refine_scenario

__version__ = "0.1.0"
__all__ = ["BACKEND", "Hierarchy", "build_initial_mesh", "refine_scenario", "__version__"]
