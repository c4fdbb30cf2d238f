"""Endomorphisms of P^1 and P^2: periodic points, cycle estimates of Lyapunov exponents, inverse branches."""
from .endomorphism import (
    DynamicsError,
    ProjectiveEndomorphism,
    chart_map,
    chart_radius,
    fs_distance,
    fs_multiplier,
    normalize_point,
    point_from_affine,
)
from .periodic import PeriodicPointRecord, PeriodicPointSet, find_periodic_points, preimages
from .lyapunov import (
    CycleEstimate,
    DensityReport,
    OracleResult,
    birkhoff_lyapunov_oracle,
    cycle_lyapunov_estimate,
    exterior_norm,
    gamma_bound,
    phi_n,
    repelling_density_check,
)
from .branches import BackwardOrbit, NTReport, inverse_branch, orbit_exponents, verify_nt

__all__ = [
    "DynamicsError",
    "ProjectiveEndomorphism",
    "chart_map",
    "chart_radius",
    "fs_distance",
    "fs_multiplier",
    "normalize_point",
    "point_from_affine",
    "PeriodicPointRecord",
    "PeriodicPointSet",
    "find_periodic_points",
    "preimages",
    "CycleEstimate",
    "DensityReport",
    "OracleResult",
    "birkhoff_lyapunov_oracle",
    "cycle_lyapunov_estimate",
    "exterior_norm",
    "gamma_bound",
    "phi_n",
    "repelling_density_check",
    "BackwardOrbit",
    "NTReport",
    "inverse_branch",
    "orbit_exponents",
    "verify_nt",
]
