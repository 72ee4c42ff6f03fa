"""Exact and Monte Carlo treatment of the block-counting jump chain.

The chain is simulated in embedded-jump-chain form: categorical next state
plus an exponential holding time, which is exact and works even when the
event intensity of the thinning construction diverges.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np
from numpy.random import Generator

from . import kernels, streams
from .measures import LambdaSpec
from .rates import workspace

__all__ = [
    "PathRecord",
    "AbsorptionProfile",
    "LastMergerMC",
    "simulate_path",
    "absorption_profile",
    "last_merger_mc",
    "first_passage_stats",
]

DP_SIZE_GUARD = 20_000
MC_TABLE_GUARD = 4_096

_T_REL_TOL = 1e-12


@dataclass(frozen=True)
class PathRecord:
    """One realized trajectory of the block-counting chain.

    ``states`` strictly decreases from the initial count down to 1;
    ``holding_times[m]`` is the time spent in ``states[m]``.
    """

    initial_n: int
    states: np.ndarray
    holding_times: np.ndarray

    def __post_init__(self) -> None:
        s = self.states
        if s[0] != self.initial_n or s[-1] != 1:
            raise ValueError("path must run from the initial count down to 1")
        if not (np.diff(s) < 0).all():
            raise ValueError("states must be strictly decreasing")
        if len(self.holding_times) != len(s) - 1:
            raise ValueError("need one holding time per pre-absorption state")
        if (self.holding_times <= 0).any():
            raise ValueError("holding times must be positive")

    @property
    def T_n(self) -> float:
        return float(self.holding_times.sum())

    @property
    def L_n(self) -> int:
        return int(self.states[-2])

    @property
    def n_jumps(self) -> int:
        return len(self.states) - 1


@dataclass(frozen=True)
class AbsorptionProfile:
    """Exact absorption data for the chain started at ``n``.

    ``hit_prob[i]`` is the probability the chain ever visits ``i``;
    ``last_merger_law[i]`` the probability the final jump happens from ``i``;
    ``mu_profile[i] = hit_prob[i] / rho_i`` the pre-limit invariant profile.
    Arrays are indexed by the state (entries below 2 are zero) and read-only.
    """

    n: int
    hit_prob: np.ndarray
    last_merger_law: np.ndarray
    mu_profile: np.ndarray
    log_rho_total: np.ndarray


_dp_cache: dict[tuple, AbsorptionProfile] = {}
_dp_lock = threading.Lock()
_DP_CACHE_MAX = 32


def absorption_profile(spec: LambdaSpec, n: int, *,
                       override_size_guard: bool = False) -> AbsorptionProfile:
    """Backward DP over rate rows: O(n^2) time, O(n) memory.

    ``n`` above the desk-scale guard requires ``override_size_guard=True``.
    """
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    if n > DP_SIZE_GUARD and not override_size_guard:
        raise ValueError(
            f"n={n} exceeds the size guard {DP_SIZE_GUARD} for the O(n^2) DP; "
            "pass override_size_guard=True to force it"
        )
    key = (spec.kingman_mass, spec.atoms, spec.beta_component, n)
    with _dp_lock:
        hit = _dp_cache.get(key)
    if hit is not None:
        return hit
    ws = workspace(spec, n)
    h, law, logrho_tot = kernels.absorption_dp(ws, n)
    with np.errstate(invalid="ignore"):
        mu = h * np.exp(-logrho_tot)
    mu[:2] = 0.0
    for arr in (h, law, mu, logrho_tot):
        arr.flags.writeable = False
    prof = AbsorptionProfile(n=n, hit_prob=h, last_merger_law=law,
                             mu_profile=mu, log_rho_total=logrho_tot)
    with _dp_lock:
        if len(_dp_cache) >= _DP_CACHE_MAX:
            _dp_cache.pop(next(iter(_dp_cache)))
        _dp_cache[key] = prof
    return prof


def simulate_path(spec: LambdaSpec, n: int, rng: Generator) -> PathRecord:
    """Draw one trajectory from ``n`` down to absorption."""
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    ws = workspace(spec, n)
    row_cache: dict[int, tuple[np.ndarray, float]] = {}
    states = [n]
    holds = []
    b = n
    while b > 1:
        row = row_cache.get(b)
        if row is None:
            logrho, tot = kernels.row_log_rho(ws, b)
            cdf = np.cumsum(np.exp(logrho - tot))
            cdf[-1] = 1.0
            row = (cdf, math.exp(tot))
            row_cache[b] = row
        cdf, rho = row
        holds.append(rng.exponential(1.0 / rho))
        b = int(np.searchsorted(cdf, rng.random(), side="right")) + 1
        states.append(b)
    return PathRecord(initial_n=n,
                      states=np.array(states, dtype=np.int64),
                      holding_times=np.array(holds))


def first_passage_stats(path: PathRecord, k: int) -> tuple[float, int]:
    """Time and state at the first passage strictly below ``k``."""
    if not 2 <= k <= path.initial_n:
        raise ValueError(f"need 2 <= k <= {path.initial_n}, got k={k}")
    below = np.nonzero(path.states < k)[0]
    idx = int(below[0])
    tau = float(path.holding_times[:idx].sum())
    return tau, int(path.states[idx])


# ---------------------------------------------------------------------------
# block Monte Carlo engine
# ---------------------------------------------------------------------------

_tables_cache: dict[tuple, kernels.JumpTables] = {}
_tables_lock = threading.Lock()


def _jump_tables(spec: LambdaSpec, n: int) -> kernels.JumpTables:
    key = (spec.kingman_mass, spec.atoms, spec.beta_component)
    with _tables_lock:
        tab = _tables_cache.get(key)
        if tab is None or tab.n < n:
            tab = kernels.build_jump_tables(workspace(spec, n), n)
            _tables_cache[key] = tab
    return tab


def simulate_blocks(spec: LambdaSpec, n: int, replicates: int, seed: int, *,
                    r_tail: int = 0, threads: int = 1,
                    override_size_guard: bool = False):
    """Simulate many paths; returns ``(L, T, n_jumps, tail_states, tail_holds)``.

    ``tail_*`` are ring buffers holding the last ``r_tail + 1`` pre-jump
    states and holding times of each path.  Replicates are split into fixed
    blocks, one substream per block, so results do not depend on ``threads``.
    """
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    if replicates < 1:
        raise ValueError("need at least one replicate")
    if n > MC_TABLE_GUARD and not override_size_guard:
        raise ValueError(
            f"n={n} exceeds the Monte Carlo table guard {MC_TABLE_GUARD}; "
            "pass override_size_guard=True to force it"
        )
    tables = _jump_tables(spec, n)
    r_slots = r_tail + 1

    def run(block_idx: int, lo: int, hi: int):
        rng = streams.substream(seed, block_idx)
        u = rng.random((2, hi - lo, n - 1))
        return kernels.run_jump_chunk(tables, n, u[0], u[1], r_slots)

    parts = streams.map_blocks(run, replicates, threads)
    return tuple(np.concatenate([p[f] for p in parts]) for f in range(5))


def unwind_tail(tail_states, tail_holds, n_jumps, r: int):
    """Reorder ring buffers into reversed-path order.

    Row ``m`` of the outputs is the state (and its holding time) ``m`` jumps
    before absorption; ``valid`` flags replicates with at least ``r + 1``
    jumps.
    """
    r_slots = r + 1
    m = np.arange(r_slots)
    idx = (n_jumps[:, None] - 1 - m[None, :]) % r_slots
    states = np.take_along_axis(tail_states, idx, axis=1)
    holds = np.take_along_axis(tail_holds, idx, axis=1)
    return states, holds, n_jumps >= r_slots


@dataclass(frozen=True)
class LastMergerMC:
    """Empirical law of the last pre-absorption state with Wilson intervals."""

    n: int
    replicates: int
    seed: int
    ci_level: float
    counts: np.ndarray  # indexed by state
    freq: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray

    @property
    def support(self) -> np.ndarray:
        return np.nonzero(self.counts)[0]


def _wilson(counts: np.ndarray, total: int, z: float):
    phat = counts / total
    denom = 1.0 + z * z / total
    center = (phat + z * z / (2 * total)) / denom
    half = (z / denom) * np.sqrt(phat * (1 - phat) / total + z * z / (4 * total * total))
    return np.maximum(center - half, 0.0), np.minimum(center + half, 1.0)


def last_merger_mc(spec: LambdaSpec, n: int, replicates: int, seed: int, *,
                   threads: int = 1, ci_level: float = 0.99,
                   override_size_guard: bool = False) -> LastMergerMC:
    """Monte Carlo law of the last pre-absorption state."""
    L, _, _, _, _ = simulate_blocks(spec, n, replicates, seed, r_tail=0,
                                    threads=threads,
                                    override_size_guard=override_size_guard)
    counts = np.bincount(L, minlength=n + 1).astype(np.float64)
    from scipy.stats import norm

    z = float(norm.ppf(0.5 + ci_level / 2.0))
    lo, hi = _wilson(counts, replicates, z)
    freq = counts / replicates
    for arr in (counts, freq, lo, hi):
        arr.flags.writeable = False
    return LastMergerMC(n=n, replicates=replicates, seed=seed, ci_level=ci_level,
                        counts=counts, freq=freq, ci_lo=lo, ci_hi=hi)
