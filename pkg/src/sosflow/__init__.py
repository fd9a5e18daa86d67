"""Solver toolkit for a singular fourth-order surface evolution law in 1-D.

Three independent routes to the same dynamics live side by side: a proximal
(backward-Euler minimizing-movement) solver in log-slope coordinates, a
direct conservative finite-difference oracle for the strong form, and a
discrete step-flow simulator whose continuum limit motivates the model.
The diagnostics module checks every analytic invariant at desk scale.
"""

from .bcf import (
    BcfTimeConfig,
    StepConfiguration,
    StepTrajectory,
    bcf_evolve,
    bcf_rhs,
    profile_to_steps,
    step_forces,
    steps_to_profile,
)
from .diagnostics import (
    DiagnosticsRecord,
    EviReport,
    PerturbationReport,
    RefinementReport,
    evi_test,
    feasible_probe_profiles,
    perturbation_test,
    record,
    singularity_refinement_study,
)
from .errors import (
    BlowUp,
    InfeasibleProbe,
    InfeasibleStart,
    MonotonicityLost,
    NoDecrease,
    NonMonotone,
    NotNormalized,
    ParseError,
    SosflowError,
    StepCollision,
    ValidationError,
)
from .evolution import (
    DerivedBounds,
    EvolutionConfig,
    LipschitzReport,
    Trajectory,
    derive_bounds,
    evolve,
    lipschitz_estimate,
    local_slope_estimate,
)
from .functional import (
    BvBallSpec,
    FunctionalValue,
    bv_ball_indicator,
    chemical_potential,
    convexity_probe,
    driving_functional,
    functional_height_gradient,
    logslope_total_variation,
    proximal_objective,
    slope_total_variation,
    surface_energy,
)
from .grid import (
    CurvatureDecomposition,
    GridSpec,
    HeightProfile,
    LogSlopeField,
    ThresholdRule,
    curvature,
    log_slope_field,
    reconstruct,
    slopes,
)
from .initial import kink_profile, linear_profile, profile_from_csv, sine_profile
from .resolvent import InnerSolverConfig, StepReport, reduced_gradient, resolvent_step
from .strong_form import OracleConfig, oracle_evolve, rhs

__version__ = "0.1.0"
