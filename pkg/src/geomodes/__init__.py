"""Conservative second-order dynamics on Riemannian manifolds.

Simulation of metric-plus-potential systems, geodesic shooting and tubular
charts, detection and verification of nonlinear normal modes, and the
constructive design of potentials that turn a prescribed geodesic into a
strict oscillation mode.
"""

__version__ = "0.1.0"

from .dynamics import (
    PotentialField,
    State,
    Trajectory,
    circular_potential,
    double_pendulum_metric,
    equations_of_motion,
    integrate,
    quadratic_potential,
    total_energy,
    zero_potential,
)
from .design import (
    Certification,
    DesignResult,
    DesignSpec,
    DesignedPotential,
    GeodesicForceField,
    OnGeodesicForce,
    beta_bound,
    definiteness_check,
    design_strict_potential,
    designed_potential_in_q,
    extend_force_field,
    integrability_residual,
    integrate_potential,
    on_geodesic_force,
)
from .geodesics import (
    GeodesicChart,
    GeodesicCurve,
    SpeedLaw,
    chart_inverse,
    chart_inverse_batch,
    geodesic_chart,
    geodesic_residuals,
    shoot_geodesic,
    shoot_geodesic_two_sided,
    speed_law_solve,
)
from .manifold import (
    MetricField,
    christoffel,
    contravariant_gradient,
    covariant_acceleration,
    euclidean_metric,
    inner_product,
    metric_eval,
    tangential_normal_split,
)
from .modes import (
    LinearMode,
    ModeCandidate,
    StrictModeReport,
    detect_period,
    equipotential_point,
    find_mode,
    linearized_modes,
    periodicity_measure,
    scaling_invariance_test,
    turning_points,
    verify_strict_mode,
)

__all__ = [name for name in dir() if not name.startswith("_")]
