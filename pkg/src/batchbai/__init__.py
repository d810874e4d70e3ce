"""Batched best-arm identification with instance-adaptive batch budgets."""

from .complexity import (
    ComplexityReport,
    batch_complexity_mab,
    h_index,
    potential_sequence,
)
from .core import (
    BatchRecord,
    EmpiricalArms,
    GapProfile,
    InvalidArmError,
    LinearInstance,
    MabInstance,
    NonUniqueBestError,
    RunTrace,
    batch_rng,
    gap_profile,
    instance_from_dict,
    instance_to_dict,
    load_instance,
    pull,
    sample_rewards,
    save_instance,
    trace_csv_rows,
    trace_to_dict,
)
from .linbandit import (
    LinBatchRecord,
    RageConfig,
    batch_complexity_linear,
    linear_potential_sequence,
    run_is_rage,
    survivor_containment_check,
)
from .mab import (
    BudgetExhaustedError,
    EventCheckReport,
    SeConfig,
    empirical_event_check,
    run_is_se,
)
from .optdesign import (
    Allocation,
    DegenerateSetError,
    Design,
    InsufficientBudgetError,
    RoundingFailureError,
    UnreachableDirectionError,
    difference_set,
    max_design_norm,
    psi_star,
    round_design,
    solve_design,
    starred_difference_set,
)
from .bench import (
    AggregateRow,
    ExperimentSpec,
    gen_basis_linear,
    gen_example,
    load_ratings_csv,
    run_experiment,
    summarize_results_dir,
    write_aggregate_csv,
)

__version__ = "0.1.0"
