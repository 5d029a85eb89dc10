"""SDFEM on Shishkin triangular meshes: discrete Green's functions and weighted energy estimates."""

from .assembly import (FemFunction, SdfemSystem, assemble_rhs, assemble_system, evaluate,
                       nodal_interpolant, sd_norm)
from .config import AssumptionWarning, ConfigError, ProblemConfig
from .green import (Directions, GreenFunction, WeightParams, compute_green, omega0_membership,
                    omega0_prime, weight, weighted_norm)
from .mesh import ShishkinMesh, build_mesh, classify_region, mesh_sizes, transition_parameters
from .solver import BandedFactorization, factorize

__version__ = "0.1.0"
