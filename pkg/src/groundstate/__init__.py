"""Ground states of Schrödinger operators with convex potentials on convex polygons.

The toolkit computes the transverse and longitudinal length scales of a
potential ``V = h**-2`` with concave height ``h``, solves the Dirichlet
ground state of ``-Laplacian + V`` and measures the constants in the shape,
decay and eigenvalue inequalities that the scales predict.
"""

from .analysis import Tolerances, agmon_distance
from .config import RunConfig
from .eig2d import assemble_2d, dense_oracle_2d, first_eig_2d, level_set, log_concavity_check
from .errors import GroundStateError
from .geometry import ConvexDomain, Lattice, john_ellipse, min_width_direction
from .potential import Potential, eval_potential, height_from_spec, validate_height
from .pipeline import run_pipeline
from .scales import compute_L1, compute_L2, orient_domain
from .sturm1d import dpsi_dx_l2, first_eig_1d, mu_profile, operator_A_first_eig

__all__ = [
    "ConvexDomain",
    "GroundStateError",
    "Lattice",
    "Potential",
    "RunConfig",
    "Tolerances",
    "agmon_distance",
    "assemble_2d",
    "compute_L1",
    "compute_L2",
    "dense_oracle_2d",
    "dpsi_dx_l2",
    "eval_potential",
    "first_eig_1d",
    "first_eig_2d",
    "height_from_spec",
    "john_ellipse",
    "level_set",
    "log_concavity_check",
    "min_width_direction",
    "mu_profile",
    "operator_A_first_eig",
    "orient_domain",
    "run_pipeline",
    "validate_height",
]
