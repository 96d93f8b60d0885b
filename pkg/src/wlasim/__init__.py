"""Workload-level asynchronicity analyzer and execution simulator.

Models heterogeneous CPU/GPU workflows as dependency graphs over task
sets, quantifies how much asynchronous execution their structure and
resource pool permit, predicts sequential and asynchronous makespans
analytically, and validates the predictions with a deterministic
discrete-event simulation.
"""
from .graph import (
    Branch,
    DependencyGraph,
    GraphValidationError,
    PlanDerivationError,
    TaskSet,
    build_staggered_pipeline,
    derive_plan,
    doa_dep,
    path_cover,
    validate,
)
from .predict import (
    MaskedStage,
    Parallel,
    Prediction,
    PredictionError,
    Stage,
    StagePlan,
    apply_overheads,
    branch_ttx,
    masked_stages,
    masking_feasible,
    predict_tasync,
    predict_tasync_by_position,
    predict_tasync_masked,
    predict_tseq,
    relative_improvement,
)
from .resources import (
    Demand,
    Dimension,
    ResourceError,
    ResourcePool,
    concurrency_limit,
    doa_res,
    set_demand,
    wave_count,
    wla,
)
from .sim import (
    POLICY_DEPENDENCY,
    POLICY_SEQUENTIAL,
    SimConfig,
    SimulationError,
    TaskRecord,
    Trace,
    run,
    sample_tx,
    utilization,
    verify_trace,
)
from .workloads import (
    BUILTIN_NAMES,
    WorkflowError,
    WorkflowParseError,
    WorkflowSchemaError,
    WorkflowSpec,
    builtin,
    load_workflow,
    save_workflow,
)

__version__ = "0.1.0"
