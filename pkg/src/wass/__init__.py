"""Wasserstein calculus on finitely supported measures.

Exact W_p transport, displacement geodesics, weak continuity-equation checks,
tangent projections, differentials of pushforward maps and convex mixings.
"""

from .curves import MeasureCurve, VelocityCurve, SpaceTimeTests, continuity_residual, flow_curve, geodesic_curve
from .geometry import AtomVectorField, MetricField, l2_inner, l2_norm
from .measures import DiscreteMeasure, PointMap, ValidationError, pushforward, support
from .ot import TransportPlan, optimal_plan, wasserstein
from .tangent import GradientDictionary, TangentProjection, project, tangency_residual

__version__ = "0.1.0"
