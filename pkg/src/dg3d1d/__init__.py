"""Discontinuous Galerkin solver for diffusion in a 3D box coupled to embedded 1D vessels."""

__version__ = "0.1.0"

from .errors import (ConvergenceError, Dg3d1dError, GeometryError, InvalidArgumentError,
                     MeshInvalidError, NetworkFormatError, NotSPDError, OutOfDomainError)
from .mesh3d import Mesh3, build_box_mesh, build_grid_index, locate_point, locate_points
from .network1d import VesselGraph, build_edge_meshes, classify_vertices
from .problem import CoupledProblem, Solution
from .timestepping import TimeGrid, l2_project_initial, run, step
from .verify import Mms3d1d, MmsNetwork, RateTable, run_convergence
