"""Exterior problems for the exponential Radon transform on the plane."""

from .geometry import (AffineMap, ConvexRegion, Direction, ExteriorScanSet, Line, classify_region,
                       epsilon_offset, halfstrip, line_intersects, map_region, normalizing_affine, parse_region,
                       polyhedral, quadrant, transport_line, wedge)
from .fields import (Bump, ConditionE, DensityField, ExpDecay, Gaussian, Mollified, Restricted, StretchedExp,
                     Transported, Zero, class_condition_probe, mollify, parse_field, restrict, stretched_exp_field,
                     transport_affine)
from .quadrature import QuadratureSpec
from .transform import (GridSpec, MomentTable, Sinogram, convolution_check, direct_moment_table,
                        helgason_moment_check, line_integral, sinogram, weighted_moment, weighted_moments)
from .moments import RecursionConfig, recover_moments, validate_recursion
from .laplace import moment_vanishing_test, moments_1d, series_vs_transform, two_sided_laplace
from .counterexample import counterexample_field, transport_correspondence, vanishing_summary
from .config import parse_config

__version__ = "0.1.0"

__all__ = [
    "AffineMap", "Bump", "class_condition_probe", "classify_region", "ConditionE", "ConvexRegion",
    "convolution_check", "counterexample_field", "DensityField", "direct_moment_table", "Direction",
    "epsilon_offset", "ExpDecay", "ExteriorScanSet", "Gaussian", "GridSpec", "halfstrip", "helgason_moment_check",
    "Line", "line_integral", "line_intersects", "map_region", "Mollified", "mollify", "moment_vanishing_test",
    "moments_1d", "MomentTable", "normalizing_affine", "parse_config", "parse_field", "parse_region", "polyhedral",
    "quadrant", "QuadratureSpec", "recover_moments", "RecursionConfig", "restrict", "Restricted",
    "series_vs_transform", "sinogram", "Sinogram", "stretched_exp_field", "StretchedExp", "transport_affine",
    "transport_correspondence", "transport_line", "Transported", "two_sided_laplace", "validate_recursion",
    "vanishing_summary", "wedge", "weighted_moment", "weighted_moments", "Zero",
]
