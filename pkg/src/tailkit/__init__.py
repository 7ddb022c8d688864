"""tailkit: simulation and exact positivity criteria for heavy-tailed
affine-type Lipschitz recursions."""

__version__ = "0.1.0"

from .measure import (  # noqa: F401
    Atom,
    AtomicMeasure,
    LogMoments,
    MeasureError,
    ParametricDriver,
    TailkitError,
    arithmeticity_warning,
    degeneracy_check,
    load_measure,
    validate,
)
from .cramer import (  # noqa: F401
    CramerRoot,
    MomentFunction,
    NoPositiveRoot,
    NotContracting,
    moment_ratio_conditions,
    solve_alpha,
)
from .engine import (  # noqa: F401
    MapFamily,
    SampleBatch,
    SimConfig,
    UserLipschitzFamily,
    backward_perpetuity,
    get_family,
    iterate_forward,
    pathwise_domination_check,
    sample_perpetuity,
    sample_stationary,
    sample_sup_pi,
    sup_pi,
)
from .tailstats import (  # noqa: F401
    TailReport,
    build_tail_report,
    empirical_ccdf,
    hill_estimator,
    ks_distance,
    loglog_slope,
    tail_constant,
)
from .criteria import (  # noqa: F401
    CriteriaVerdict,
    LetacConstants,
    SupportClass,
    affine_support_classification,
    cv_condition,
    fixed_point,
    full_verdict,
    goldie_sufficient,
    invariant_halfline_check,
    letac_constants,
    letac_positivity,
    maxzero_positivity,
)
