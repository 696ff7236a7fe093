"""Numerical core: meshes, assembly, the DtN operator and its semigroup."""

from .assembly import BoundaryMass, boundary_mass, mass, robin_form, stiffness
from .dtn import DtnOperator, build_dtn, dtn_apply, harmonic_extension, weak_normal_derivative
from .geometry import Comb, CombLayout, Cusp, Parallelogram, PolygonalAnnulus, PolygonalDisk, Rectangle, Tooth
from .mesh import Mesh, boundary_length, build_domain, refine
from .robin import BetaZeroEstimate, RobinReport, beta_zero_scan, lower_bound_gap, robin_solve
from .semigroup import SpectralSemigroup, equilibrium, evolve, operator_norm_gap
from .spectral import ConstantReport, SteklovSpectrum, spectral_count, steklov_spectrum

__all__ = [
    "Mesh",
    "build_domain",
    "refine",
    "boundary_length",
    "Rectangle",
    "PolygonalDisk",
    "PolygonalAnnulus",
    "Parallelogram",
    "Tooth",
    "Comb",
    "CombLayout",
    "Cusp",
    "BoundaryMass",
    "stiffness",
    "mass",
    "boundary_mass",
    "robin_form",
    "DtnOperator",
    "build_dtn",
    "dtn_apply",
    "harmonic_extension",
    "weak_normal_derivative",
    "SteklovSpectrum",
    "ConstantReport",
    "steklov_spectrum",
    "spectral_count",
    "SpectralSemigroup",
    "evolve",
    "equilibrium",
    "operator_norm_gap",
    "RobinReport",
    "BetaZeroEstimate",
    "lower_bound_gap",
    "beta_zero_scan",
    "robin_solve",
]
