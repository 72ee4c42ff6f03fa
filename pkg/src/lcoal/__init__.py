"""Block-counting dynamics of multiple-merger coalescents.

Exact merger rates, absorption profiles and last-merger laws, invariant
measures of the jump dynamics, the time-reversed chain, and the
subordinator-coupled approximation of the log block count.
"""

from .chain import (
    AbsorptionProfile,
    LastMergerMC,
    PathRecord,
    absorption_profile,
    first_passage_stats,
    last_merger_mc,
    simulate_path,
)
from .coupling import CouplingTrace, discrepancy_quantiles, simulate_coupled
from .invariant import (
    InvariantEstimate,
    ResidualReport,
    invariant_from_profiles,
    residual_check,
)
from .kernels import ACTIVE_BACKEND, NUMBA_AVAILABLE
from .measures import ConditionReport, LambdaSpec, check_conditions
from .rates import (
    RateRow,
    consistency_residual,
    drift_f,
    event_rate,
    lambda_bk,
    log_lambda_bk,
    rate_row,
    transition_probs,
)
from .reference import LimitLaw, beta_limit_law, beta_mu_from_limit, kingman_invariant
from .reversal import (
    ReversedChainSpec,
    ReversedPath,
    ReversalTestResult,
    build_reversed,
    empirical_reversal_test,
    simulate_reversed,
)
from .streams import substream

__version__ = "0.1.0"

__all__ = [
    "ACTIVE_BACKEND",
    "NUMBA_AVAILABLE",
    "AbsorptionProfile",
    "ConditionReport",
    "CouplingTrace",
    "InvariantEstimate",
    "LambdaSpec",
    "LastMergerMC",
    "LimitLaw",
    "PathRecord",
    "RateRow",
    "ResidualReport",
    "ReversalTestResult",
    "ReversedChainSpec",
    "ReversedPath",
    "absorption_profile",
    "beta_limit_law",
    "beta_mu_from_limit",
    "build_reversed",
    "check_conditions",
    "consistency_residual",
    "discrepancy_quantiles",
    "drift_f",
    "empirical_reversal_test",
    "event_rate",
    "first_passage_stats",
    "invariant_from_profiles",
    "kingman_invariant",
    "lambda_bk",
    "last_merger_mc",
    "log_lambda_bk",
    "rate_row",
    "residual_check",
    "simulate_coupled",
    "simulate_path",
    "simulate_reversed",
    "substream",
    "transition_probs",
]
