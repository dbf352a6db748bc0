"""Order-restricted hypothesis tests with certificates of validity.

Distance tests for subspace-vs-cone and cone-vs-complement problems, the
chi-bar-square machinery behind their null distributions, and a composite
safe test whose certificate pre-test drives the probability of rejecting
in favor of an alternative that does not hold (a Type III error) to zero
in large samples.
"""

__version__ = "0.1.0"

from .chibar import (
    DEFAULT_MC_DRAWS,
    DEFAULT_SEED,
    ChiBarWeights,
    joint_tail,
    mixture_lower_tail,
    mixture_upper_tail,
    safe_level_2d,
    solve_critical,
    solve_nominal_level,
    weights_closed_form_2d,
    weights_monte_carlo,
)
from .errors import (
    CapabilityError,
    ContractViolationError,
    DegenerateVarianceError,
    InfeasibleLevelError,
    InternalInvariantError,
    NotPositiveDefiniteError,
    NumericError,
    OrderSafeError,
    SingularMatrixError,
)
from .geometry import (
    ConeSpec,
    LinearSubspace,
    Metric,
    acceptance_member_type_a,
    acceptance_member_type_b,
    face_dimension,
    in_polar_orthant,
    inner,
    polar_complement,
    project_cone,
    project_subspace,
)
from .isotonic import (
    IsotonicFit,
    SplitCheck,
    UmbrellaCheck,
    WeightedSeries,
    av,
    minmax_project,
    pava,
    simple_order_consistency,
    tree_order_consistency,
    umbrella_consistency,
)
from .studies import (
    CS_TABLE5,
    CS_TABLE6,
    ContingencyTable2xK,
    PowerResult,
    PowerScenario,
    StochasticOrderProblem,
    build_stochastic_order,
    doubled_table,
    power_grid,
    run_power_scenario,
    silvapulle_case,
    simulation_means,
)
from .testing import (
    FULL_SPACE,
    Conclusion,
    ConsistencyCheck,
    SafeOutcome,
    Statistic,
    TestResult,
    WeightConfig,
    consistency_region,
    delta,
    dt_type_a,
    dt_type_b,
    p_value,
    safe_test,
)

__all__ = [name for name in dir() if not name.startswith("_")]
