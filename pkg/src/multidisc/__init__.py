"""Multi-color discrepancy and group fair division: hard-instance generators,
exact and heuristic solvers, and exact checks of the probability bounds behind
the lower-bound constructions."""
from .core import (
    Allocation,
    BoundReport,
    CapacityError,
    Coloring,
    DimensionError,
    DomainError,
    GroupedInstance,
    MultidiscError,
    ParameterError,
    ParseError,
    PreconditionError,
    Rational,
    SetSystem,
    Surd,
    ValidationError,
    parse_allocation,
    parse_coloring,
    parse_instance,
    parse_set_system,
    serialize_allocation,
    serialize_coloring,
    serialize_instance,
    serialize_set_system,
)
from .discrepancy import (
    DiscrepancyResult,
    check_discrepancy_at_most,
    discrepancy,
    min_discrepancy_exact,
    min_discrepancy_search,
    solve_exact,
)
from .fairness import (
    cd_min_d,
    ef_min_d,
    exact_min_over_allocations,
    is_cd,
    is_ef,
    is_prop,
    prop_min_d,
    set_system_to_instance,
)
from .generators import (
    ConstructionParams,
    TheoremRangeWarning,
    gen_disc_system,
    gen_ef_instance,
    gen_prop_instance,
    gen_propnew_instance,
)
from .probability import (
    binom_tail_ge,
    binom_tail_le,
    disc_chain_report,
    ef_event_chain_report,
    estimate_event_rate,
    event_prob_disc,
    lemma2_check,
    prop_event_chain_report,
    propnew_event_chain_report,
    reverse_chernoff_bound,
    verify_reverse_chernoff,
)

__version__ = "0.1.0"
