"""Invariant measures of the jump dynamics via pre-limit absorption profiles.

Truncating the balance equations at a finite support forces the zero
solution, so the solver route is the probabilistic one: hitting-probability
profiles at a schedule of start sizes, compared at the largest two.  The
verdict thresholds are heuristics; the underlying trichotomy is asymptotic
and not decidable at finite n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .chain import absorption_profile
from .measures import LambdaSpec
from .rates import workspace

__all__ = [
    "InvariantEstimate",
    "ResidualReport",
    "invariant_from_profiles",
    "residual_check",
]

CONVERGED = "converged"
NON_CONVERGENT = "non_convergent"
DIVERGING = "diverging_to_infinity"

DEFAULT_TOLERANCE = 1e-4
DIVERGENCE_PEAK = 1e-3


@dataclass(frozen=True)
class InvariantEstimate:
    """Invariant-measure estimate from absorption profiles.

    ``mu`` holds the profile at the largest scheduled start size, truncated
    to states <= J; the untruncated profile and its companions are kept for
    downstream consumers (time reversal needs the full support).
    """

    J: int
    mu: np.ndarray
    normalization: float
    source_n_values: tuple[int, ...]
    sup_rel_diff: float
    verdict: str
    mu_full: np.ndarray
    last_law_full: np.ndarray
    log_rho_total_full: np.ndarray
    n_max: int


def invariant_from_profiles(spec: LambdaSpec, n_schedule, J: int,
                            tolerance: float = DEFAULT_TOLERANCE, *,
                            divergence_peak: float = DIVERGENCE_PEAK,
                            override_size_guard: bool = False) -> InvariantEstimate:
    """Estimate the invariant measure and classify its convergence.

    Parameters
    ----------
    n_schedule : increasing sequence of start sizes, max at least ``4 * J``.
    J : support cutoff for the reported profile.
    tolerance : sup relative difference between the two largest profiles
        below which the verdict is "converged".
    """
    schedule = tuple(int(n) for n in n_schedule)
    if len(schedule) < 2 or any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise ValueError("n_schedule must be strictly increasing with >= 2 entries")
    if J < 2:
        raise ValueError(f"need J >= 2, got {J}")
    if schedule[-1] < 4 * J:
        raise ValueError(
            f"schedule too short relative to J: max n {schedule[-1]} < 4*J = {4 * J}"
        )

    profiles = [absorption_profile(spec, n, override_size_guard=override_size_guard)
                for n in schedule]
    peaks = [float(p.last_merger_law[2 : J + 1].max()) for p in profiles]

    last = profiles[-1]
    prev = profiles[-2]
    mu_last = last.mu_profile[: J + 1]
    mu_prev = prev.mu_profile[: J + 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.abs(mu_last[2:] - mu_prev[2:]) / np.abs(mu_last[2:])
    rel = np.where((mu_last[2:] == 0) & (mu_prev[2:] == 0), 0.0, rel)
    rel = np.where(np.isnan(rel), np.inf, rel)
    sup_rel_diff = float(rel.max())

    nonincreasing = all(b <= a for a, b in zip(peaks, peaks[1:]))
    if nonincreasing and peaks[-1] < divergence_peak:
        verdict = DIVERGING
    elif sup_rel_diff <= tolerance:
        verdict = CONVERGED
    else:
        verdict = NON_CONVERGENT

    mu = mu_last.copy()
    mu.flags.writeable = False
    return InvariantEstimate(
        J=J,
        mu=mu,
        normalization=float(last.last_merger_law.sum()),
        source_n_values=schedule,
        sup_rel_diff=sup_rel_diff,
        verdict=verdict,
        mu_full=last.mu_profile,
        last_law_full=last.last_merger_law,
        log_rho_total_full=last.log_rho_total,
        n_max=schedule[-1],
    )


@dataclass(frozen=True)
class ResidualReport:
    """Balance-equation residuals of a candidate invariant measure.

    The incoming flow is truncated at ``J``; ``tail_proxy`` bounds what the
    dropped tail could contribute relative to the outgoing flow, and
    ``tail_truncated`` records that the check is necessarily one-sided.
    """

    J: int
    max_rel_residual: float
    residuals: np.ndarray  # indexed by state, 2 <= i <= J // 2
    normalization: float  # total flow into state 1 under mu
    tail_truncated: bool
    tail_proxy: float


def residual_check(spec: LambdaSpec, mu: np.ndarray, J: int) -> ResidualReport:
    """Max relative defect of the balance equations for states up to J/2.

    ``mu`` is indexed by state and must be positive on 2..J.
    """
    mu = np.asarray(mu, dtype=np.float64)
    if J < 4:
        raise ValueError(f"need J >= 4, got {J}")
    if mu.shape[0] < J + 1:
        raise ValueError(f"mu must cover states up to J={J}")
    if (mu[2 : J + 1] <= 0).any():
        raise ValueError("mu must be positive on 2..J")
    ws = workspace(spec, J)
    acc, rho = kernels.flow_accumulate(ws, J, mu)
    half = J // 2
    out = mu[2 : half + 1] * rho[2 : half + 1]
    res = np.abs(acc[2 : half + 1] - out) / out
    # largest single dropped-tail term relative to the outgoing flow
    lr_J, _ = kernels.row_log_rho(ws, J)
    tail_terms = mu[J] * np.exp(lr_J[1:half])  # jumps from J into 2..half
    tail_proxy = float((tail_terms / out).max())
    res_full = np.zeros(half + 1)
    res_full[2:] = res
    res_full.flags.writeable = False
    return ResidualReport(
        J=J,
        max_rel_residual=float(res.max()),
        residuals=res_full,
        normalization=float(acc[1]),
        tail_truncated=True,
        tail_proxy=tail_proxy,
    )
