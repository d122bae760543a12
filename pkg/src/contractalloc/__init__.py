"""contractalloc: tier-priced service contracts with distributed robot
allocation.

The package covers the full pipeline of a multi-tier robotic service
provider: a closed-form incentive-compatible payment menu per service tier,
truthful user tier selection, a synchronous gradient-descent allocation
engine with logarithmic collision barriers, three uncertainty baselines
(belief-averaged robust deployment, belief-argmax, belief-sampling), and a
seeded batch harness that reproduces the stock eight-scenario study.
"""

from .economics import (
    ConstraintReport,
    EconomicParams,
    GainMode,
    ParameterError,
    PaymentMenu,
    RobotProfile,
    UserProfile,
    distance_energy,
    gain,
    optimal_payment,
    payment_oracle,
    request_utility,
    user_best_response,
    verify_ic_ir,
)
from .engine import (
    AllocationResult,
    AllocationTrace,
    InfeasibleAllocationError,
    PhysicsParams,
    Workspace,
    WorldState,
    assign_users,
    attraction_control,
    barrier_control,
    clip_controls,
    locational_energy,
    make_world,
    run_allocation,
    step_world,
)
from .baselines import (
    BASELINE_METHODS,
    METHOD_CONTRACT,
    METHOD_MAX,
    METHOD_ROBUST,
    METHOD_SAMPLE,
    ComparisonReport,
    TypeEstimate,
    count_mismatches,
    energy_differences,
    estimate_max,
    estimate_sample,
    group_users_by_type,
    run_robust,
    run_with_types,
    true_type_energy,
)
from .scenarios import (
    SCENARIOS,
    Case,
    CaseSeedPlan,
    GenerationConfig,
    GenerationError,
    ScenarioSpec,
    generate_case,
    load_scenario_file,
    scenario_from_dict,
    scenario_to_dict,
)
from .harness import (
    BatchResult,
    CaseMethodRecord,
    CaseRun,
    ScenarioSummary,
    Stats,
    build_manifest,
    run_batch,
    run_case,
    summarize,
    write_batch_outputs,
)
from .kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = [
    "AllocationResult",
    "AllocationTrace",
    "BASELINE_METHODS",
    "BatchResult",
    "Case",
    "CaseMethodRecord",
    "CaseRun",
    "CaseSeedPlan",
    "ComparisonReport",
    "ConstraintReport",
    "EconomicParams",
    "GainMode",
    "GenerationConfig",
    "GenerationError",
    "InfeasibleAllocationError",
    "KERNEL_BACKEND",
    "METHOD_CONTRACT",
    "METHOD_MAX",
    "METHOD_ROBUST",
    "METHOD_SAMPLE",
    "ParameterError",
    "PaymentMenu",
    "PhysicsParams",
    "RobotProfile",
    "SCENARIOS",
    "ScenarioSpec",
    "ScenarioSummary",
    "Stats",
    "TypeEstimate",
    "UserProfile",
    "Workspace",
    "WorldState",
    "assign_users",
    "attraction_control",
    "barrier_control",
    "build_manifest",
    "clip_controls",
    "count_mismatches",
    "distance_energy",
    "energy_differences",
    "estimate_max",
    "estimate_sample",
    "gain",
    "generate_case",
    "group_users_by_type",
    "load_scenario_file",
    "locational_energy",
    "make_world",
    "optimal_payment",
    "payment_oracle",
    "request_utility",
    "run_allocation",
    "run_batch",
    "run_case",
    "run_robust",
    "run_with_types",
    "scenario_from_dict",
    "scenario_to_dict",
    "step_world",
    "summarize",
    "true_type_energy",
    "user_best_response",
    "verify_ic_ir",
    "write_batch_outputs",
]
