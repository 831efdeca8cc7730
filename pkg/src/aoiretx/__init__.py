"""Optimal re-transmit-or-preempt scheduling for age of information.

Exact MDP construction, truncated-space solvers, structural checks and a
slot-level simulator.
"""
from .model import (
    INF,
    Action,
    FeasibilityError,
    Params,
    State,
    TruncatedSpace,
    build_kernel,
    cost,
    enumerate_states,
    feasible_actions,
    make_state,
    state_index,
    transitions,
    transitions_truncated,
)
from .sim import (
    ALWAYS_PREEMPT,
    NEVER_PREEMPT,
    THRESHOLD,
    BaselineKind,
    PolicyRule,
    TrajectoryStats,
    UndefinedPolicyError,
    extend_policy,
    make_baseline,
    simulate,
    simulate_drop_baseline,
    step,
)
from .solver import (
    ConvergenceError,
    EvalResult,
    Policy,
    SolveResult,
    ValueTable,
    brute_force_optimal,
    discounted_vi,
    evaluate_policy_exact,
    greedy_policy,
    rvia,
    threshold_summary,
)
from .structure import (
    StructureReport,
    check_concavity,
    check_lemma4,
    check_lemma7,
    check_monotonicity,
    check_theorem2,
    run_all_checks,
)

__version__ = "0.1.0"
