"""Demand-based service-quota allocation schemes and simulation harness."""

from .baselines import allocate_da, allocate_ea, allocate_proportional_contribution
from .game import (
    NeDiagnostics,
    StrategyProfile,
    check_ne_conditions,
    deviation_sweep,
    nash_demands,
    welfare_bound,
)
from .idf import allocate_idf, descending_psi_order, idf_water_level
from .itf import (
    FillResult,
    TankState,
    allocate_burst,
    allocate_itf,
    allocate_itf_ccp,
    allocate_itf_info,
    effective_demand_caps,
    fill_tanks,
    make_tanks,
    probit,
)
from .metrics import (
    OverProvisionStats,
    UtilityVector,
    jain_closed_form,
    jain_index,
    over_provision_stats,
    utilities,
    welfare,
)
from .model import (
    Allocation,
    AllocationProblem,
    RealizedDemand,
    ScenarioConfig,
    UserProfile,
    assert_feasible,
    generate_scenario,
    realize_demands,
    sample_truncated_normal,
    sample_uniform,
    substream,
)
from .oracle import (
    FairnessViolation,
    grid_welfare_max,
    maxmin_transfer_search,
    projected_ascent_welfare,
    waterfill_bisection,
)
from .sim import (
    ExperimentReport,
    MicroStudyReport,
    MicroUser,
    SlotOutcome,
    UNWELCOME_USERS,
    WELCOME_USERS,
    run_burst_phase,
    run_macro_experiment,
    run_micro_study,
    run_uncertainty_experiment,
)

__all__ = [
    "Allocation",
    "AllocationProblem",
    "ExperimentReport",
    "FairnessViolation",
    "FillResult",
    "MicroStudyReport",
    "MicroUser",
    "NeDiagnostics",
    "OverProvisionStats",
    "RealizedDemand",
    "ScenarioConfig",
    "SlotOutcome",
    "StrategyProfile",
    "TankState",
    "UNWELCOME_USERS",
    "UserProfile",
    "UtilityVector",
    "WELCOME_USERS",
    "allocate_burst",
    "allocate_da",
    "allocate_ea",
    "allocate_idf",
    "allocate_itf",
    "allocate_itf_ccp",
    "allocate_itf_info",
    "allocate_proportional_contribution",
    "assert_feasible",
    "check_ne_conditions",
    "descending_psi_order",
    "deviation_sweep",
    "effective_demand_caps",
    "fill_tanks",
    "generate_scenario",
    "grid_welfare_max",
    "idf_water_level",
    "jain_closed_form",
    "jain_index",
    "make_tanks",
    "maxmin_transfer_search",
    "nash_demands",
    "over_provision_stats",
    "probit",
    "projected_ascent_welfare",
    "realize_demands",
    "run_burst_phase",
    "run_macro_experiment",
    "run_micro_study",
    "run_uncertainty_experiment",
    "sample_truncated_normal",
    "sample_uniform",
    "substream",
    "utilities",
    "waterfill_bisection",
    "welfare",
    "welfare_bound",
]

__version__ = "0.1.0"
