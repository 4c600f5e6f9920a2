"""Dynamic monetary, concave and coherent utility functionals on finite filtered probability trees."""
from __future__ import annotations

from .composition import (
    Mode as DensityMode,
    ScenarioSet,
    StabilityReport,
    build_density,
    check_m_stability,
    check_stability,
    concat,
    concat_closure,
    m_stable_closure,
    normalize_from,
    paste_density,
)
from .consistency import (
    ConsistencyReport,
    ExtendedProcess,
    Mode as CheckMode,
    Verdict,
    certify_sufficiency,
    check_penalty_recursion,
    check_time_consistency,
    decompose_acceptance,
    extend_process,
)
from .filtration import (
    ConditionalValue,
    FiltrationTree,
    StoppingTime,
    build_tree,
    conditional_expectation,
    enumerate_stopping_times,
)
from .functionals import (
    AggregatedProcess,
    Aggregation,
    EntropicBase,
    EntropicProcess,
    LinearBase,
    PenaltyFunction,
    RobustProcess,
    TrivialProcess,
    UtilityFunctional,
    UtilityProcess,
    WorstStoppingProcess,
    accepts,
    check_relevance,
    condition_at,
    eval_aggregated,
    eval_entropic,
    eval_robust,
    gamma_ext,
    penalty_sharp,
    recover_from_acceptance,
    snell_worst_stopping,
    to_robust,
)
from .optim import LinearProgram, Status, hull_membership, lp_solve
from .processes import (
    AdaptedProcess,
    Classification,
    DensityProcess,
    classify_density,
    pairing,
    project,
    sup_norm,
)

__version__ = "0.1.0"
