"""Minimality and stability of cones over S^m x S^n for the area functional.

The symmetry reduction turns the problem into weighted geodesics in the
quarter plane; see :mod:`equicone.orbit`, :mod:`equicone.geodesic`,
:mod:`equicone.classify` and :mod:`equicone.fields`.
"""

__version__ = "0.1.0"

from ._jit import NUMBA_ENABLED
from .classify import (
    CompeteResult,
    CrossingReport,
    FoliationReport,
    Minimality,
    Stability,
    StabilityReport,
    Verdict,
    compete,
    crossing_count,
    foliation_check,
    minimality_verdict,
    rayleigh_infimum,
    stability_margin,
    stability_verdict,
    sweep,
)
from .fields import (
    BoundReport,
    CoareaReport,
    CoverageError,
    EmptyResultError,
    GridField,
    LevelSetFamily,
    MaskedCellsError,
    coarea_check,
    foliation_function,
    make_cutoff,
    mse_residual,
    one_tension,
    tension_bound_check,
    tv_isotropic,
    tv_l1,
    weighted_one_tension,
)
from .geodesic import (
    BVPResult,
    Event,
    GeodesicIntegrationError,
    GeodesicState,
    IntegratorControls,
    Linearization,
    Trajectory,
    integrate,
    integrate_from_axis,
    linearize_at_cone,
    solve_bvp,
    start_from_axis,
)
from .orbit import (
    Curve,
    DomainError,
    OrbitParams,
    QuadrantPoint,
    cone_angle,
    cone_profile,
    density,
    ray_length,
    weighted_length,
)

__all__ = [
    "__version__",
    "BVPResult",
    "BoundReport",
    "CoareaReport",
    "CompeteResult",
    "CoverageError",
    "CrossingReport",
    "Curve",
    "DomainError",
    "EmptyResultError",
    "Event",
    "FoliationReport",
    "GeodesicIntegrationError",
    "GeodesicState",
    "GridField",
    "IntegratorControls",
    "LevelSetFamily",
    "Linearization",
    "MaskedCellsError",
    "Minimality",
    "NUMBA_ENABLED",
    "OrbitParams",
    "QuadrantPoint",
    "Stability",
    "StabilityReport",
    "Trajectory",
    "Verdict",
    "coarea_check",
    "compete",
    "cone_angle",
    "cone_profile",
    "crossing_count",
    "density",
    "foliation_check",
    "foliation_function",
    "integrate",
    "integrate_from_axis",
    "linearize_at_cone",
    "make_cutoff",
    "minimality_verdict",
    "mse_residual",
    "one_tension",
    "ray_length",
    "rayleigh_infimum",
    "solve_bvp",
    "stability_margin",
    "stability_verdict",
    "start_from_axis",
    "sweep",
    "tension_bound_check",
    "tv_isotropic",
    "tv_l1",
    "weighted_length",
    "weighted_one_tension",
]
