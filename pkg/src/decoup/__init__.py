"""Numerical lab for l2 decoupling on the quartic surface xi -> (xi, sum xi_j^4)."""

from .caps import (KINDS, AxisInterval, Cap, CapFamily, box_cap, cap_family, flatness, locate,
                   locate_many, omega_regions, tau_decompose, unit_cube)
from .errors import DecoupError
from .harness import (ENSEMBLE_KINDS, Ensemble, GrowthFit, RatioRecord, SweepConfig, curvature,
                      curve_pieces, curve_ratio, decoupling_ratio, fit_growth, recursion_closed_form,
                      recursion_iterate, recursion_profile, sweep)
from .oscillo import (FrequencyFunction, SpacePointSet, WeightSpec, eval_extension, lp_norm,
                      quadrature_nodes)
from .phase import PhaseSpec
from .rescale import (AffineConjugation, check_phase_conditions, conjugate, image_bounding_box,
                      verify_conjugation)

__all__ = [
    "KINDS", "AxisInterval", "Cap", "CapFamily", "box_cap", "cap_family", "flatness", "locate",
    "locate_many", "omega_regions", "tau_decompose", "unit_cube",
    "DecoupError",
    "ENSEMBLE_KINDS", "Ensemble", "GrowthFit", "RatioRecord", "SweepConfig", "curvature",
    "curve_pieces", "curve_ratio", "decoupling_ratio", "fit_growth", "recursion_closed_form",
    "recursion_iterate", "recursion_profile", "sweep",
    "FrequencyFunction", "SpacePointSet", "WeightSpec", "eval_extension", "lp_norm",
    "quadrature_nodes",
    "PhaseSpec",
    "AffineConjugation", "check_phase_conditions", "conjugate", "image_bounding_box",
    "verify_conjugation",
]
__version__ = "0.1.0"
