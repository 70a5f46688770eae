"""Monotone Hopf-harmonic mappings between planar Jordan domains."""
from .geometry import DomainError, JordanDomain, Location, classify_points, contains_point, somewhere_convex_probe
from .harmonic import (
    BoundaryMap,
    douglas_integral,
    douglas_study,
    harmonic_replacement,
    poisson_extension,
    radial_extension,
    rkc_extend_and_check,
    solve_dirichlet,
)
from .hopf import energy_identity_gap, holomorphy_residual, hopf_product, stretch
from .mesh import MeshMap, TriangleMesh, dirichlet_energy, jacobian_stats, submesh_by_image, triangulate
from .quaddiff import QuadDifferential, constancy_on_trajectory, minimal_length_check, trace_vertical
from .alternating import (
    AlternatingConfig,
    check_discrete_monotonicity,
    detect_squeezing,
    estimate_critical_epsilon,
    run_alternating,
)

__version__ = "0.1.0"
