"""Resource allocation for wireless federated learning over MC-NOMA with flexible aggregation."""
from .baselines import (SCHEMES, SYNC_PAIRS, allocate_full_power, allocate_oma_flexible,
                        allocate_sync_full_power, allocate_sync_joint, allocate_sync_oma,
                        allocate_sync_power_only)
from .clustering import cluster_random, cluster_sorted
from .core import (Assignment, InfeasibleDelayError, RoundConfig, UserProfile, compute_delay,
                   feasible_minibatches, sic_sinr, total_delay, uplink_delay, uplink_rate)
from .harness import Scenario, generate_realization, load_scenario, montecarlo, run_sweep
from .kernel import NumericalError, allocate_budget, hessian_psd_check, minimize_1d
from .metric import RoundMetrics, lptm, round_metrics, wgptm
from .noma import (AllocationResult, allocate_joint, allocate_power_only, recover_a_all,
                   recover_powers, recover_qn, solve_p5, zn_objective)

__all__ = [
    "SCHEMES", "SYNC_PAIRS", "Assignment", "AllocationResult", "InfeasibleDelayError",
    "NumericalError", "RoundConfig", "RoundMetrics", "Scenario", "UserProfile",
    "allocate_budget", "allocate_full_power", "allocate_joint", "allocate_oma_flexible",
    "allocate_power_only", "allocate_sync_full_power", "allocate_sync_joint",
    "allocate_sync_oma", "allocate_sync_power_only", "cluster_random", "cluster_sorted",
    "compute_delay", "feasible_minibatches", "generate_realization", "hessian_psd_check",
    "load_scenario", "lptm", "minimize_1d", "montecarlo", "recover_a_all", "recover_powers",
    "recover_qn", "round_metrics", "run_sweep", "sic_sinr", "solve_p5", "total_delay",
    "uplink_delay", "uplink_rate", "wgptm", "zn_objective",
]
