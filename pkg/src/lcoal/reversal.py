"""Time reversal of the block-counting chain from the last merger.

The reversed chain climbs upward with rates proportional to the invariant
weights; since those weights are only available on a finite support, every
simulation is truncated at a cutoff J with explicit accounting of the mass
that escapes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.random import Generator
from scipy.stats import chisquare, kstest

from . import kernels, streams
from .chain import simulate_blocks, unwind_tail
from .invariant import CONVERGED, InvariantEstimate
from .measures import LambdaSpec
from .rates import workspace

__all__ = [
    "ReversedChainSpec",
    "ReversedPath",
    "ReversalTestResult",
    "build_reversed",
    "simulate_reversed",
    "empirical_reversal_test",
]

REVERSAL_J_GUARD = 4_096


@dataclass(frozen=True)
class ReversedChainSpec:
    """Upward jump chain: rates ``rho_hat[i, j]`` for 2 <= i < j <= J.

    ``rho_forward[i]`` is the forward exit rate, which equals the total
    reversed exit rate; the part of it not covered by the table is the
    per-state escape rate beyond J.
    """

    J: int
    rho_hat: np.ndarray
    rho_hat_total: np.ndarray
    rho_forward: np.ndarray
    initial_law: np.ndarray
    initial_tail_mass: float


def build_reversed(spec: LambdaSpec, inv: InvariantEstimate,
                   J: int | None = None) -> ReversedChainSpec:
    """Reversed-chain rates from a converged invariant estimate."""
    if inv.verdict != CONVERGED:
        raise ValueError(
            f"time reversal needs a converged invariant estimate, got {inv.verdict!r}"
        )
    if J is None:
        J = inv.n_max
    if J > inv.n_max:
        raise ValueError(f"J={J} exceeds the profile support {inv.n_max}")
    if J > REVERSAL_J_GUARD:
        raise ValueError(f"J={J} exceeds the dense-table guard {REVERSAL_J_GUARD}")
    mu = inv.mu_full
    if (mu[2 : J + 1] <= 0).any():
        raise ValueError("invariant weights must be positive up to J")
    ws = workspace(spec, J)
    rho_hat = np.zeros((J + 1, J + 1))
    rho_forward = np.zeros(J + 1)
    for j in range(2, J + 1):
        logrho, tot = kernels.row_log_rho(ws, j)
        rho_forward[j] = math.exp(tot)
        if j > 2:
            rho_hat[2:j, j] = mu[j] * np.exp(logrho[1:]) / mu[2:j]
    initial_law = inv.last_law_full[: J + 1].copy()
    tail = float(inv.last_law_full[J + 1 :].sum())
    for arr in (rho_hat, rho_forward, initial_law):
        arr.flags.writeable = False
    tot_hat = rho_hat.sum(axis=1)
    tot_hat.flags.writeable = False
    return ReversedChainSpec(
        J=J,
        rho_hat=rho_hat,
        rho_hat_total=tot_hat,
        rho_forward=rho_forward,
        initial_law=initial_law,
        initial_tail_mass=tail,
    )


@dataclass(frozen=True)
class ReversedPath:
    states: np.ndarray
    holding_times: np.ndarray
    truncated: bool  # a jump carried the path beyond the table
    censored: bool  # the horizon cut the last holding time short


def simulate_reversed(rspec: ReversedChainSpec, horizon: float,
                      rng: Generator) -> ReversedPath:
    """One upward path started from the (truncated) initial law."""
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    u = rng.random()
    cum = np.cumsum(rspec.initial_law[2:])
    if u >= cum[-1]:
        # initial mass beyond the support cutoff
        return ReversedPath(states=np.empty(0, dtype=np.int64),
                            holding_times=np.empty(0), truncated=True,
                            censored=False)
    i = int(np.searchsorted(cum, u, side="right")) + 2
    states = [i]
    holds: list[float] = []
    t = 0.0
    truncated = censored = False
    while True:
        rate = rspec.rho_forward[i]
        dt = rng.exponential(1.0 / rate)
        if t + dt >= horizon:
            holds.append(horizon - t)
            censored = True
            break
        t += dt
        holds.append(dt)
        row = rspec.rho_hat[i, i + 1 :]
        u = rng.random() * rate
        if row.size == 0:
            truncated = True
            break
        cum = np.cumsum(row)
        if u >= cum[-1]:
            truncated = True
            break
        i = i + 1 + int(np.searchsorted(cum, u, side="right"))
        states.append(i)
    return ReversedPath(states=np.array(states, dtype=np.int64),
                        holding_times=np.array(holds),
                        truncated=truncated, censored=censored)


@dataclass(frozen=True)
class ReversalTestResult:
    """Forward-path reversal compared with the reversed-chain law."""

    chi2: float
    chi2_df: int
    chi2_pvalue: float
    ks_stats: tuple[float, ...]
    ks_pvalues: tuple[float, ...]
    n_valid: int
    n_insufficient: int
    cells: int


def empirical_reversal_test(spec: LambdaSpec, n: int, replicates: int, r: int,
                            seed: int, rspec: ReversedChainSpec, *,
                            threads: int = 1, min_expected: float = 10.0,
                            override_size_guard: bool = False) -> ReversalTestResult:
    """Simulate forward paths, reverse the last ``r + 1`` jumps, and test the
    state vector (chi-square) and each holding time (KS after the
    probability-integral transform) against the reversed-chain law.
    """
    if not 0 <= r <= 5:
        raise ValueError(f"need 0 <= r <= 5, got {r}")
    if n > rspec.J:
        raise ValueError(
            f"start size n={n} exceeds the reversed-table support J={rspec.J}; "
            "forward paths could escape the table"
        )
    _, _, nj, ts, th = simulate_blocks(spec, n, replicates, seed, r_tail=r,
                                       threads=threads,
                                       override_size_guard=override_size_guard)
    states, holds, valid = unwind_tail(ts, th, nj, r)
    n_valid = int(valid.sum())
    n_insufficient = replicates - n_valid
    if n_valid == 0:
        raise ValueError(f"no replicate had at least {r + 1} jumps")
    states = states[valid]
    holds = holds[valid]

    # chi-square on the reversed state vector
    vecs, counts = np.unique(states, axis=0, return_counts=True)
    probs = np.empty(len(vecs))
    for idx, v in enumerate(vecs):
        p = rspec.initial_law[v[0]]
        for m in range(r):
            p *= rspec.rho_hat[v[m], v[m + 1]] / rspec.rho_forward[v[m]]
        probs[idx] = p
    order = np.argsort(-probs)
    probs, counts = probs[order], counts[order]
    exp_counts = probs * n_valid
    keep = exp_counts >= min_expected
    f_obs = list(counts[keep].astype(float))
    f_exp = list(exp_counts[keep])
    rest_obs = float(counts[~keep].sum())
    rest_exp = n_valid * (1.0 - probs[keep].sum())
    if rest_exp > 0 or rest_obs > 0:
        f_obs.append(rest_obs)
        f_exp.append(max(rest_exp, 1e-12))
    if len(f_obs) < 2:
        chi2, pval = 0.0, 1.0
    else:
        # rescale away rounding drift so the partition sums match exactly
        f_exp = np.array(f_exp) * (n_valid / np.sum(f_exp))
        chi2, pval = chisquare(np.array(f_obs), f_exp)
    df = max(len(f_obs) - 1, 0)

    # KS per holding slot via 1 - exp(-rate * dt) ~ Uniform(0, 1)
    ks_stats = []
    ks_pvalues = []
    for m in range(r + 1):
        rate = rspec.rho_forward[states[:, m]]
        u = -np.expm1(-rate * holds[:, m])
        res = kstest(u, "uniform")
        ks_stats.append(float(res.statistic))
        ks_pvalues.append(float(res.pvalue))

    return ReversalTestResult(
        chi2=float(chi2), chi2_df=df, chi2_pvalue=float(pval),
        ks_stats=tuple(ks_stats), ks_pvalues=tuple(ks_pvalues),
        n_valid=n_valid, n_insufficient=n_insufficient, cells=len(f_obs),
    )
