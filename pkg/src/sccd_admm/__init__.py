"""Deterministic simulator for decentralized consensus ADMM.

Implements a full-exchange baseline (``dadmm``), a communication-adaptive
variant that samples neighbors by importance and searches its per-round
communication count (``sccd``), and the sampling-free linearized reference
(``dsccd``), together with synthetic sparse logistic problems, cost/delay
accounting, and a reproducible experiment harness.
"""

from .accounting import (
    CostLedger,
    DelayModel,
    DelaySummary,
    delay_summary,
    metrics,
    per_value_slot_seconds,
    record_round,
    round_costs,
    should_stop,
)
from .adapt import (
    SamplingWeights,
    SearchAttempt,
    cost_per_progress,
    progress_consensus,
    progress_objective,
    sampling_weights,
    search_num,
    select_nodes,
    variance_bound,
)
from .engine import (
    NodeState,
    RoundRecord,
    RunConfig,
    RunResult,
    dsccd_step,
    eta_schedule,
    grad_h_full,
    grad_h_sampled,
    init_states,
    p_update_full,
    p_update_sampled,
    run,
    run_round,
    x_update_dadmm,
    x_update_sccd_l1,
    x_update_sccd_l2,
)
from .harness import (
    AGGREGATE_COLUMNS,
    SUMMARY_COLUMNS,
    TRACE_COLUMNS,
    ExperimentSpec,
    default_c,
    derive_seed,
    experiment_graph,
    load_config,
    read_csv_rows,
    resolve_lambda,
    run_experiment,
    save_config,
)
from .problem import (
    Dataset,
    LogisticObjective,
    RegularizerSpec,
    centralized_reference,
    consensus_objective_value,
    dataset_hash,
    load_dataset,
    local_smooth_gradient,
    local_smooth_value,
    make_labels,
    node_objectives,
    pooled_objective,
    prox_or_subgrad,
    regularizer_value,
    save_dataset,
    synthesize,
)
from .solvers import InnerSolverError, fista_box_l1, minimize_l2_composite, soft_threshold
from .topology import (
    DisconnectedGraphError,
    Graph,
    generate_erdos_renyi,
    laplacian,
    laplacian_lambda_max,
    load_edge_list,
    neighbors,
    save_edge_list,
)
from .verify import run_all as run_verification

__version__ = "0.1.0"
