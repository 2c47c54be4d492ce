"""Concave comparison-function shaping for Lyapunov decay under input bounds.

Public surface: comparison functions and the rational concave factor
(`comparison`), windowed decay metrics (`windowed`), actuation-level bounds
(`actuation`), endpoint normalization and tuning (`tuning`), the CLF-QP
controllers (`qp`), the case-study plants (`plant`), and the simulation
harness (`sim`). The `concaveclf` CLI drives analysis, tuning, simulation
and reproduction of the reference results.
"""

from ._backend import USING_NUMBA, backend_name
from .comparison import (
    ComparisonFn,
    Linear,
    NormalizedConcave,
    PowerComparison,
    PowerComposedRational,
    RationalConcave,
    RationalFactorParams,
    SqrtComparison,
    Tabulated,
    classify_shape,
    dynamic_factor,
    eval_alpha,
    make_concave_comparison,
    normalized_concave,
    power_composed_factor,
    rational_factor,
)
from .windowed import (
    RateReport,
    Window,
    compose_rates,
    crossing_time,
    detect_concave_subinterval,
    nominal_rate,
    rate_report,
    relaxation_ratio,
    verify_ordering,
)
from .actuation import (
    AsymptoticSpec,
    RegularityConstants,
    actuation_lower_bound,
    asymptotic_regime,
    level_cap,
    pointwise_decay_cap,
    regularity_from_plant,
    required_actuation,
    sample_sublevel,
)
from .tuning import (
    TuningSpec,
    closed_form_rate,
    feasibility_margin,
    normalize_ell,
    solve_kmax,
    tuning_recipe,
)
from .qp import (
    QpProblem,
    QpSolution,
    clf_qp_hard,
    clf_qp_soft,
    flexible_clf_qp,
    mini_norm,
    solve_small_qp,
)
from .plant import (
    AttitudeState,
    PendulumParams,
    PlantModel,
    QuadParams,
    get_plant,
    hat,
    lyap_solve_2x2,
    pendulum_model,
    quad_attitude_model,
    single_integrator_model,
    vee,
)
from .sim import (
    MetricsReport,
    SimConfig,
    TrajectoryRecord,
    comparison_envelope,
    crossing_time_empirical,
    metrics,
    simulate,
    state_bound_check,
)

__version__ = "0.1.0"
