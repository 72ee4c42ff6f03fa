"""Joint simulation of the block count, its driving subordinator, and the
drift-corrected log approximation.

Supported only for measures with a finite event intensity (atoms, or a Beta
component with first parameter above 2) and a dust component: exactly then
the event process has almost surely finitely many points per unit time.
Infinite-intensity dust measures would need a small-p truncation, which is
left as a documented extension.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.random import Generator

from . import kernels, streams
from .measures import LambdaSpec, check_conditions

__all__ = ["CouplingTrace", "QuantileRow", "simulate_coupled", "discrepancy_quantiles"]

DEFAULT_MAX_STEP = 0.05
_MAX_EVENTS = 10_000_000


@dataclass(frozen=True)
class _EventParams:
    intensity: float
    atom_p: np.ndarray
    atom_cum: np.ndarray  # cumulative event-intensity weights, atoms first
    beta_a: float
    beta_b: float
    # drift-kernel arguments
    at_ivw: np.ndarray
    at_logq: np.ndarray
    b_ls: float


def _event_params(spec: LambdaSpec) -> _EventParams:
    report = check_conditions(spec)
    if not report.has_dust:
        raise ValueError("coupling requires a measure with dust")
    if not math.isfinite(report.intensity_integral):
        raise ValueError(
            "coupling requires finite event intensity (atoms, or a Beta "
            "component with first parameter > 2)"
        )
    atom_p = np.array([p for p, _ in spec.atoms])
    atom_w = np.array([w / (p * p) for p, w in spec.atoms])
    if spec.has_beta:
        a, b, scale = spec.beta_component
        beta_mass = scale * (a + b - 1) * (a + b - 2) / ((a - 1) * (a - 2))
        from scipy.special import betaln

        b_ls = math.log(scale) - betaln(a, b)
    else:
        a = b = math.nan
        beta_mass = 0.0
        b_ls = -math.inf
    weights = np.append(atom_w, beta_mass)
    with np.errstate(divide="ignore"):
        at_ivw = np.log(atom_w)
        at_logq = np.log1p(-atom_p)
    return _EventParams(
        intensity=float(weights.sum()),
        atom_p=atom_p,
        atom_cum=np.cumsum(weights),
        beta_a=a,
        beta_b=b,
        at_ivw=at_ivw,
        at_logq=at_logq,
        b_ls=b_ls,
    )


@dataclass(frozen=True)
class CouplingTrace:
    """Time-aligned record of one coupled run.

    Event arrays share a common index: time, jump of the subordinator, block
    count right after the event, subordinator value, and the approximation
    right before / after its drop.  ``sup_discrepancy`` is taken over the
    window up to the first passage below the threshold, excluding the
    absorption instant itself; ``residual_max`` is the largest deviation of
    the path from its own drift integral (independent Simpson quadrature).
    """

    n: int
    k_threshold: int
    event_times: np.ndarray
    jump_sizes: np.ndarray
    block_counts: np.ndarray
    s_values: np.ndarray
    y_left: np.ndarray
    y_right: np.ndarray
    sup_discrepancy: float
    sup_log_minus_s: float
    residual_max: float
    stopped: str  # "threshold" or "absorbed"

    @property
    def n_events(self) -> int:
        return len(self.event_times)


def simulate_coupled(spec: LambdaSpec, n: int, k_threshold: int, rng: Generator, *,
                     max_step: float = DEFAULT_MAX_STEP) -> CouplingTrace:
    """Run the event-driven construction from ``n`` until the block count
    first drops below ``k_threshold`` (or is absorbed)."""
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    if not 2 <= k_threshold <= n:
        raise ValueError(f"need 2 <= k_threshold <= n, got {k_threshold}")
    par = _event_params(spec)
    log_n = math.log(n)
    b = n
    t = 0.0
    s_val = 0.0
    y = log_n
    simp = 0.0
    sup = 0.0
    sup_s = 0.0
    resid = 0.0
    times: list[float] = []
    sizes: list[float] = []
    blocks: list[int] = []
    s_list: list[float] = []
    y_l: list[float] = []
    y_r: list[float] = []
    stopped = "threshold"
    for _ in range(_MAX_EVENTS):
        gap = rng.exponential(1.0 / par.intensity)
        log_b = math.log(b)
        base = log_n - s_val
        y, simp, g_sup, g_res = kernels.integrate_gap(
            y, gap, max_step, log_b, base, simp,
            par.at_ivw, par.at_logq, par.beta_a, par.beta_b, par.b_ls)
        sup = max(sup, g_sup)
        resid = max(resid, g_res)
        sup_s = max(sup_s, abs(log_b - base))
        t += gap
        # event: pick a component of the intensity measure, then p
        u = rng.random() * par.intensity
        ci = int(np.searchsorted(par.atom_cum, u, side="right"))
        if ci < len(par.atom_p):
            p = float(par.atom_p[ci])
        else:
            p = float(rng.beta(par.beta_a - 2.0, par.beta_b))
        x = -math.log1p(-p)
        s_val += x
        y -= x
        n_keep = int(rng.binomial(b, 1.0 - p))
        b_new = n_keep + (1 if n_keep < b else 0)
        times.append(t)
        sizes.append(x)
        blocks.append(b_new)
        s_list.append(s_val)
        y_l.append(y + x)
        y_r.append(y)
        if b_new == 1:
            # absorption instant excluded from the window
            stopped = "absorbed"
            break
        if b_new < k_threshold:
            sup = max(sup, abs(math.log(b_new) - y))
            sup_s = max(sup_s, abs(math.log(b_new) - (log_n - s_val)))
            break
        b = b_new
    else:
        raise RuntimeError("event budget exhausted; measure intensity too high?")
    return CouplingTrace(
        n=n,
        k_threshold=k_threshold,
        event_times=np.array(times),
        jump_sizes=np.array(sizes),
        block_counts=np.array(blocks, dtype=np.int64),
        s_values=np.array(s_list),
        y_left=np.array(y_l),
        y_right=np.array(y_r),
        sup_discrepancy=sup,
        sup_log_minus_s=sup_s,
        residual_max=resid,
        stopped=stopped,
    )


@dataclass(frozen=True)
class QuantileRow:
    n: int
    k: int
    level: float
    quantile: float


def discrepancy_quantiles(spec: LambdaSpec, n_schedule, k_schedule, replicates: int,
                          seed: int, *, levels=(0.9,), threads: int = 1,
                          max_step: float = DEFAULT_MAX_STEP):
    """Empirical quantiles of the sup discrepancy per (n, k) pair.

    Returns ``(rows, sups)`` where ``sups[(n, k)]`` holds the per-replicate
    sup discrepancies (in replicate order) and ``rows`` the quantile table.
    One substream per replicate, keyed by a global replicate counter, so the
    table is reproducible for any thread count.
    """
    if replicates < 1:
        raise ValueError("need at least one replicate")
    combos = [(int(n), int(k)) for n in n_schedule for k in k_schedule]
    for n, k in combos:
        if not 2 <= k <= n:
            raise ValueError(f"invalid pair n={n}, k={k}")
    rows: list[QuantileRow] = []
    sups: dict[tuple[int, int], np.ndarray] = {}
    for ci, (n, k) in enumerate(combos):
        base = ci * replicates

        def run(block_idx: int, lo: int, hi: int):
            out = np.empty(hi - lo)
            for rep in range(lo, hi):
                rng = streams.substream(seed, base + rep)
                out[rep - lo] = simulate_coupled(
                    spec, n, k, rng, max_step=max_step).sup_discrepancy
            return out

        parts = streams.map_blocks(run, replicates, threads)
        vals = np.concatenate(parts)
        vals.flags.writeable = False
        sups[(n, k)] = vals
        for level in levels:
            rows.append(QuantileRow(n=n, k=k, level=float(level),
                                    quantile=float(np.quantile(vals, level))))
    return rows, sups
