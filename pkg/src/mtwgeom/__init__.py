"""Numerical geometry of the weak MTW condition for transport costs.

Modules: ``cost_model`` (costs, derivatives, A1/A2), ``c_exp`` (c-exponential,
c-segments), ``mtw`` (three MTW checkers and scans), ``sections`` (sections,
c-hyperplanes, curvature), ``transform`` (discrete c-transforms, contact sets)
and ``cli``.
"""

__version__ = "0.1.0"

from .cost_model import (A2Violation, CostError, CostFunction, DomainBox, builtin_cost, default_domains,
                         derivative_bundle, verify_a1a2)
from .c_exp import CExpError, c_exp, c_segment, c_star_exp, dual_c_segment
from .mtw import a_matrix, check_a3v_direct, check_a3w_codim1, check_duality_invariance, mtw_tensor, scan

__all__ = [
    "A2Violation", "CostError", "CostFunction", "DomainBox", "builtin_cost", "default_domains",
    "derivative_bundle", "verify_a1a2", "CExpError", "c_exp", "c_segment", "c_star_exp", "dual_c_segment",
    "a_matrix", "check_a3v_direct", "check_a3w_codim1", "check_duality_invariance", "mtw_tensor", "scan",
]
