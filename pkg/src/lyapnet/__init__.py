"""Quadratic-Lyapunov scheduling with Lagrange-multiplier structure.

The library simulates slot-based stochastic queueing networks under
greedy drift-plus-penalty control, exposes the dual of the underlying
deterministic problem (evaluation, subgradient methods, multiplier
search, geometry probes), implements the delay-reduced variants built on
place-holder backlog, and verifies the attraction and sandwich
properties empirically.
"""

from .model import (
    ActionRecord,
    ContinuousActions,
    NetworkSpec,
    StateSpec,
    ValidationError,
    load_spec_json,
    one_step_distance_contract_check,
    queue_update,
    sample_state,
    sample_states,
    spec_from_dict,
    spec_to_dict,
    substream,
)
from .scenarios import (
    ScenarioHandle,
    as_handle,
    by_name,
    five_queue_chain,
    load_from_file,
    single_queue_continuous,
    single_queue_discrete,
    two_queue,
)
from .dual import (
    ConvergenceError,
    DualEval,
    GeometryEstimate,
    MultiplierResult,
    ScalingReport,
    SlacknessResult,
    TheoremConstants,
    check_scaling,
    check_slackness,
    check_subgradient_inequality,
    estimate_geometry,
    evaluate_dual,
    find_optimal_multiplier,
    osm_step,
    per_state_dual,
    per_state_optimum,
    rism_step,
    theorem2_constants,
)
from .sched import (
    ALGORITHMS,
    BisectionResult,
    Decision,
    FqlaState,
    GeneralEstimate,
    bisection_placeholder,
    fqla_general_estimate,
    fqla_placeholder_ideal,
    fqla_start,
    fqla_step,
    qla_decide,
)
from .sim import (
    AbsorptionReport,
    DeviationCurve,
    RunConfig,
    SimInvariantError,
    SimReport,
    TailFit,
    TailFitError,
    Trace,
    absorption_check,
    curve_from_deviations,
    deviation_statistics,
    fit_tail,
    run,
    write_report_csv,
    write_trace_csv,
)

__version__ = "0.1.0"

__all__ = [
    "ActionRecord",
    "ContinuousActions",
    "NetworkSpec",
    "StateSpec",
    "ValidationError",
    "load_spec_json",
    "one_step_distance_contract_check",
    "queue_update",
    "sample_state",
    "sample_states",
    "spec_from_dict",
    "spec_to_dict",
    "substream",
    "ScenarioHandle",
    "as_handle",
    "by_name",
    "five_queue_chain",
    "load_from_file",
    "single_queue_continuous",
    "single_queue_discrete",
    "two_queue",
    "ConvergenceError",
    "DualEval",
    "GeometryEstimate",
    "MultiplierResult",
    "ScalingReport",
    "SlacknessResult",
    "TheoremConstants",
    "check_scaling",
    "check_slackness",
    "check_subgradient_inequality",
    "estimate_geometry",
    "evaluate_dual",
    "find_optimal_multiplier",
    "osm_step",
    "per_state_dual",
    "per_state_optimum",
    "rism_step",
    "theorem2_constants",
    "ALGORITHMS",
    "BisectionResult",
    "Decision",
    "FqlaState",
    "GeneralEstimate",
    "bisection_placeholder",
    "fqla_general_estimate",
    "fqla_placeholder_ideal",
    "fqla_start",
    "fqla_step",
    "qla_decide",
    "AbsorptionReport",
    "DeviationCurve",
    "RunConfig",
    "SimInvariantError",
    "SimReport",
    "TailFit",
    "TailFitError",
    "Trace",
    "absorption_check",
    "curve_from_deviations",
    "deviation_statistics",
    "fit_tail",
    "run",
    "write_report_csv",
    "write_trace_csv",
    "__version__",
]
