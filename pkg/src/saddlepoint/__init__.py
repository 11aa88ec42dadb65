"""Certified saddle-point duality solvers on finite supports."""

__version__ = "0.1.0"

from .certificates import Certificate, KKTReport, saddle_check
from .gauge import (ConvexGaugeSpec, conjugate, conjugate_gauge, gauge, norm_identity,
                    norm_lambda, norm_phi, pgauge_sandwich, support_of_levelset)
from .integrands import IntegrandFamily, entropy_value, integrand_eval, numeric_conjugate
from .kernels import BACKEND
from .measures import (DiscreteMeasure, FeatureMap, StructuralError, SupportPoint,
                       adjoint_features, marginal_feature_map, push_moments)
from .moment_solver import (dual_objective, qualification_check, solve, solve_box,
                            solve_equality)
from .problems import Box, Equality, MomentProblem
from .transport import (TransportProblem, c_transform, c_transform_cols, slackness_check,
                        solve_ot)

__all__ = [
    "BACKEND", "Box", "Certificate", "ConvexGaugeSpec", "DiscreteMeasure", "Equality",
    "FeatureMap", "IntegrandFamily", "KKTReport", "MomentProblem", "StructuralError",
    "SupportPoint", "TransportProblem", "adjoint_features", "c_transform", "c_transform_cols",
    "conjugate", "conjugate_gauge", "dual_objective", "entropy_value", "gauge",
    "integrand_eval", "marginal_feature_map", "norm_identity", "norm_lambda", "norm_phi",
    "numeric_conjugate", "pgauge_sandwich", "push_moments", "qualification_check",
    "saddle_check", "slackness_check", "solve", "solve_box", "solve_equality", "solve_ot",
    "support_of_levelset",
]
