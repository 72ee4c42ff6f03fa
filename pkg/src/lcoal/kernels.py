"""Hot numeric kernels: merger-rate rows, the absorption DP, jump-chain
Monte Carlo, and the coupled-path integrator.

Every kernel exists in two forms: a scalar-loop version compiled with numba
(default) and a pure-numpy fallback.  Set ``LCOAL_NO_NUMBA=1`` in the
environment before import to force the fallback; ``benchmarks/bench_backends.py``
compares the two.

All rate arithmetic is carried out in log space.  Log-binomials come from a
precomputed integer log-gamma table, and the Beta-density component uses
shifted log-gamma tables so that a full rate row costs O(b) adds and exps.
"""

from __future__ import annotations

import math
import os
from typing import NamedTuple

import numpy as np
from scipy.special import gammaln

_env = os.environ.get("LCOAL_NO_NUMBA", "").strip().lower()
_want_numba = _env not in {"1", "true", "yes"}

NUMBA_AVAILABLE = False
if _want_numba:
    try:
        from numba import njit

        NUMBA_AVAILABLE = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        pass

ACTIVE_BACKEND = "numba" if NUMBA_AVAILABLE else "numpy"

_NEG_INF = -np.inf


class Workspace(NamedTuple):
    """Per-measure numeric tables sized for block counts up to ``nmax``."""

    nmax: int
    km: float  # log of the point mass at 0 (-inf if none)
    at_logw: np.ndarray
    at_logp: np.ndarray
    at_logq: np.ndarray  # log(1-p), -inf for an atom at 1
    beta_a: float
    beta_b: float
    beta_logscale: float  # -inf if no Beta component
    lgA: np.ndarray  # lgamma(a + i), i = 0..nmax
    lgB: np.ndarray  # lgamma(b + i)
    lgAB: np.ndarray  # lgamma(a + b + i)
    lg_int: np.ndarray  # lgamma(i), i = 0..nmax+1 (index 0 unused)


def make_workspace(spec, nmax: int) -> Workspace:
    """Build the log-gamma tables and component arrays for ``spec``."""
    nmax = int(nmax)
    at_p = np.array([p for p, _ in spec.atoms], dtype=np.float64)
    at_w = np.array([w for _, w in spec.atoms], dtype=np.float64)
    with np.errstate(divide="ignore"):
        at_logp = np.log(at_p)
        at_logq = np.log1p(-at_p)
        at_logw = np.log(at_w)
    km = math.log(spec.kingman_mass) if spec.kingman_mass > 0 else _NEG_INF
    idx = np.arange(nmax + 2, dtype=np.float64)
    lg_int = gammaln(np.maximum(idx, 1.0))
    lg_int[0] = np.inf
    if spec.has_beta:
        a, b, scale = spec.beta_component
        shift = np.arange(nmax + 1, dtype=np.float64)
        lgA = gammaln(a + shift)
        lgB = gammaln(b + shift)
        lgAB = gammaln(a + b + shift)
        beta_logscale = math.log(scale)
    else:
        a = b = math.nan
        lgA = lgB = lgAB = np.empty(0, dtype=np.float64)
        beta_logscale = _NEG_INF
    return Workspace(
        nmax=nmax,
        km=km,
        at_logw=at_logw,
        at_logp=at_logp,
        at_logq=at_logq,
        beta_a=a,
        beta_b=b,
        beta_logscale=beta_logscale,
        lgA=lgA,
        lgB=lgB,
        lgAB=lgAB,
        lg_int=lg_int,
    )


# ---------------------------------------------------------------------------
# numpy row builders (also used by all non-hot call sites)
# ---------------------------------------------------------------------------


def row_log_lambda(ws: Workspace, b: int) -> np.ndarray:
    """log of the merger-rate integrals for ``k = 2..b`` (index ``k - 2``)."""
    if b > ws.nmax:
        raise ValueError(f"workspace sized for nmax={ws.nmax}, got b={b}")
    out = np.full(b - 1, _NEG_INF)
    if ws.km > _NEG_INF:
        out[0] = ws.km
    k = np.arange(2, b + 1, dtype=np.float64)
    for ai in range(ws.at_logw.shape[0]):
        if ws.at_logq[ai] == _NEG_INF:  # atom at p = 1: only the full merger
            out[b - 2] = np.logaddexp(out[b - 2], ws.at_logw[ai])
            continue
        t = ws.at_logw[ai] + (k - 2.0) * ws.at_logp[ai] + (b - k) * ws.at_logq[ai]
        out = np.logaddexp(out, t)
    if ws.beta_logscale > _NEG_INF:
        lb0 = ws.lgA[0] + ws.lgB[0] - ws.lgAB[0]
        t = (
            ws.beta_logscale
            + ws.lgA[0 : b - 1]
            + ws.lgB[0 : b - 1][::-1]
            - ws.lgAB[b - 2]
            - lb0
        )
        out = np.logaddexp(out, t)
    return out


def row_log_rho(ws: Workspace, b: int) -> tuple[np.ndarray, float]:
    """Log jump rates out of state ``b`` indexed by target ``j - 1``.

    Returns the row and the log of the total exit rate.
    """
    loglam = row_log_lambda(ws, b)
    lg = ws.lg_int
    # binomial(b, k) over k = 2..b via the integer table
    lgc = lg[b + 1] - lg[3 : b + 2] - lg[1:b][::-1]
    logrho = (lgc + loglam)[::-1].copy()
    m = logrho.max()
    if m == _NEG_INF:
        return logrho, _NEG_INF
    tot = m + math.log(np.exp(logrho - m).sum())
    return logrho, tot


# ---------------------------------------------------------------------------
# absorption DP
# ---------------------------------------------------------------------------


def _absorption_dp_np(ws: Workspace, n: int):
    h = np.zeros(n + 1)
    law = np.zeros(n + 1)
    logrho_tot = np.full(n + 1, _NEG_INF)
    h[n] = 1.0
    for b in range(n, 1, -1):
        logrho, tot = row_log_rho(ws, b)
        logrho_tot[b] = tot
        probs = np.exp(logrho - tot)
        hb = h[b]
        law[b] = hb * probs[0]
        if b > 2:
            h[2:b] += hb * probs[1:]
    return h, law, logrho_tot


def _absorption_dp_loop(n, km, at_logw, at_logp, at_logq, beta_logscale, lgA, lgB, lgAB, lg_int):
    h = np.zeros(n + 1)
    law = np.zeros(n + 1)
    logrho_tot = np.full(n + 1, -np.inf)
    logrho = np.empty(n)
    h[n] = 1.0
    has_beta = lgA.shape[0] > 0
    lb0 = 0.0
    if has_beta:
        lb0 = lgA[0] + lgB[0] - lgAB[0]
    na = at_logw.shape[0]
    for b in range(n, 1, -1):
        lgb1 = lg_int[b + 1]
        m = -np.inf
        for j in range(1, b):
            k = b - j + 1
            best = -np.inf
            kv = km if k == 2 else -np.inf
            if kv > best:
                best = kv
            bv = -np.inf
            if has_beta:
                bv = beta_logscale + lgA[k - 2] + lgB[b - k] - lgAB[b - 2] - lb0
                if bv > best:
                    best = bv
            for ai in range(na):
                if at_logq[ai] == -np.inf:
                    t = at_logw[ai] if k == b else -np.inf
                else:
                    t = at_logw[ai] + (k - 2.0) * at_logp[ai] + (b - k) * at_logq[ai]
                if t > best:
                    best = t
            if best == -np.inf:
                loglam = -np.inf
            else:
                s = np.exp(kv - best) if kv > -np.inf else 0.0
                if bv > -np.inf:
                    s += np.exp(bv - best)
                for ai in range(na):
                    if at_logq[ai] == -np.inf:
                        t = at_logw[ai] if k == b else -np.inf
                    else:
                        t = at_logw[ai] + (k - 2.0) * at_logp[ai] + (b - k) * at_logq[ai]
                    if t > -np.inf:
                        s += np.exp(t - best)
                loglam = best + np.log(s)
            v = lgb1 - lg_int[k + 1] - lg_int[b - k + 1] + loglam
            logrho[j - 1] = v
            if v > m:
                m = v
        s = 0.0
        for j in range(1, b):
            s += np.exp(logrho[j - 1] - m)
        tot = m + np.log(s)
        logrho_tot[b] = tot
        hb = h[b]
        law[b] = hb * np.exp(logrho[0] - tot)
        for j in range(2, b):
            h[j] += hb * np.exp(logrho[j - 1] - tot)
    return h, law, logrho_tot


# ---------------------------------------------------------------------------
# mass-flow accumulation (invariant-measure residuals)
# ---------------------------------------------------------------------------


def _flow_np(ws: Workspace, J: int, mu: np.ndarray):
    acc = np.zeros(J + 1)
    rho = np.zeros(J + 1)
    for b in range(2, J + 1):
        logrho, tot = row_log_rho(ws, b)
        rho[b] = math.exp(tot)
        contrib = mu[b] * np.exp(logrho)
        acc[1:b] += contrib
    return acc, rho


def _flow_loop(J, mu, km, at_logw, at_logp, at_logq, beta_logscale, lgA, lgB, lgAB, lg_int):
    acc = np.zeros(J + 1)
    rho = np.zeros(J + 1)
    logrho = np.empty(J)
    has_beta = lgA.shape[0] > 0
    lb0 = 0.0
    if has_beta:
        lb0 = lgA[0] + lgB[0] - lgAB[0]
    na = at_logw.shape[0]
    for b in range(2, J + 1):
        lgb1 = lg_int[b + 1]
        m = -np.inf
        for j in range(1, b):
            k = b - j + 1
            best = -np.inf
            kv = km if k == 2 else -np.inf
            if kv > best:
                best = kv
            bv = -np.inf
            if has_beta:
                bv = beta_logscale + lgA[k - 2] + lgB[b - k] - lgAB[b - 2] - lb0
                if bv > best:
                    best = bv
            for ai in range(na):
                if at_logq[ai] == -np.inf:
                    t = at_logw[ai] if k == b else -np.inf
                else:
                    t = at_logw[ai] + (k - 2.0) * at_logp[ai] + (b - k) * at_logq[ai]
                if t > best:
                    best = t
            if best == -np.inf:
                loglam = -np.inf
            else:
                s = np.exp(kv - best) if kv > -np.inf else 0.0
                if bv > -np.inf:
                    s += np.exp(bv - best)
                for ai in range(na):
                    if at_logq[ai] == -np.inf:
                        t = at_logw[ai] if k == b else -np.inf
                    else:
                        t = at_logw[ai] + (k - 2.0) * at_logp[ai] + (b - k) * at_logq[ai]
                    if t > -np.inf:
                        s += np.exp(t - best)
                loglam = best + np.log(s)
            v = lgb1 - lg_int[k + 1] - lg_int[b - k + 1] + loglam
            logrho[j - 1] = v
            if v > m:
                m = v
        s = 0.0
        for j in range(1, b):
            s += np.exp(logrho[j - 1] - m)
        rho[b] = np.exp(m + np.log(s))
        mb = mu[b]
        for j in range(1, b):
            acc[j] += mb * np.exp(logrho[j - 1])
    return acc, rho


# ---------------------------------------------------------------------------
# jump-chain Monte Carlo
# ---------------------------------------------------------------------------


class JumpTables(NamedTuple):
    n: int
    offsets: np.ndarray  # int64, row b occupies cdf[offsets[b]:offsets[b+1]]
    cdf: np.ndarray
    rho_tot: np.ndarray  # linear-space exit rates


def build_jump_tables(ws: Workspace, n: int) -> JumpTables:
    """Normalized transition CDFs for every state 2..n, flattened."""
    offsets = np.zeros(n + 2, dtype=np.int64)
    for b in range(2, n + 1):
        offsets[b + 1] = offsets[b] + (b - 1)
    cdf = np.empty(offsets[n + 1], dtype=np.float64)
    rho_tot = np.zeros(n + 1)
    for b in range(2, n + 1):
        logrho, tot = row_log_rho(ws, b)
        rho_tot[b] = math.exp(tot)
        c = np.cumsum(np.exp(logrho - tot))
        c[-1] = 1.0
        cdf[offsets[b] : offsets[b + 1]] = c
    return JumpTables(n=n, offsets=offsets, cdf=cdf, rho_tot=rho_tot)


_TINY_U = 2.220446049250313e-16


def _jump_chunk_loop(n0, offsets, cdf, rho_tot, u_holds, u_jumps, r_slots,
                     out_L, out_T, out_nj, out_ts, out_th):
    R = u_holds.shape[0]
    for rep in range(R):
        b = n0
        t = 0.0
        jumps = 0
        prev = n0
        while b > 1:
            u = u_holds[rep, jumps]
            if u <= 0.0:
                u = _TINY_U
            hold = -np.log1p(-u) / rho_tot[b]
            lo = offsets[b]
            hi = offsets[b + 1]
            pos = np.searchsorted(cdf[lo:hi], u_jumps[rep, jumps], side="right")
            ring = jumps % r_slots
            out_ts[rep, ring] = b
            out_th[rep, ring] = hold
            t += hold
            jumps += 1
            prev = b
            b = pos + 1
        out_L[rep] = prev
        out_T[rep] = t
        out_nj[rep] = jumps


def _jump_chunk_np(n0, offsets, cdf, rho_tot, u_holds, u_jumps, r_slots,
                   out_L, out_T, out_nj, out_ts, out_th):
    R = u_holds.shape[0]
    states = np.full(R, n0, dtype=np.int64)
    t_acc = np.zeros(R)
    alive = np.arange(R)
    step = 0
    while alive.size:
        b_arr = states[alive]
        u1 = np.clip(u_holds[alive, step], _TINY_U, None)
        holds = -np.log1p(-u1) / rho_tot[b_arr]
        t_acc[alive] += holds
        nxt = np.empty(alive.size, dtype=np.int64)
        for b in np.unique(b_arr):
            sel = b_arr == b
            lo, hi = offsets[b], offsets[b + 1]
            nxt[sel] = np.searchsorted(cdf[lo:hi], u_jumps[alive[sel], step], side="right") + 1
        ring = step % r_slots
        out_ts[alive, ring] = b_arr
        out_th[alive, ring] = holds
        done = nxt == 1
        if done.any():
            fin = alive[done]
            out_L[fin] = b_arr[done]
            out_T[fin] = t_acc[fin]
            out_nj[fin] = step + 1
        states[alive] = nxt
        alive = alive[~done]
        step += 1


# ---------------------------------------------------------------------------
# coupled-path drift and per-gap integrator
# ---------------------------------------------------------------------------


def _drift_impl(y, at_ivw, at_logq, ba, bb, b_ls):
    # sum over components of (1 - (1-p)^{e^y}) e^{-y} / p^2 weighted by mass;
    # the Beta part needs a > 2 (finite event intensity)
    z = math.exp(y)
    s = 0.0
    for i in range(at_ivw.shape[0]):
        s -= math.exp(at_ivw[i]) * math.expm1(z * at_logq[i])
    if b_ls > -math.inf:
        lg_a2 = math.lgamma(ba - 2.0)
        lb = lg_a2 + math.lgamma(bb) - math.lgamma(ba - 2.0 + bb)
        lbz = lg_a2 + math.lgamma(bb + z) - math.lgamma(ba - 2.0 + bb + z)
        s += math.exp(b_ls) * (math.exp(lb) - math.exp(lbz))
    return s * math.exp(-y)


def _make_integrate_gap(drift):
    def integrate_gap(y0, gap, hmax, log_b, base, simp0,
                      at_ivw, at_logq, ba, bb, b_ls):
        # RK4 across one inter-event gap; composite Simpson on the node
        # values to give an independent value of the accumulated drift
        # integral.  ``base`` is the current value of log(n) - S, so
        # |simpson - (y - base)| is the pathwise equation residual.
        nsteps = int(gap / hmax) + 1
        if nsteps < 8:
            nsteps = 8
        if nsteps % 2 == 1:
            nsteps += 1
        h = gap / nsteps
        y = y0
        simp = simp0
        sup = abs(log_b - y0)
        resid = 0.0
        f_cur = drift(y, at_ivw, at_logq, ba, bb, b_ls)
        f_even = f_cur
        f_odd = 0.0
        for s in range(nsteps):
            k1 = f_cur
            k2 = drift(y + 0.5 * h * k1, at_ivw, at_logq, ba, bb, b_ls)
            k3 = drift(y + 0.5 * h * k2, at_ivw, at_logq, ba, bb, b_ls)
            k4 = drift(y + h * k3, at_ivw, at_logq, ba, bb, b_ls)
            y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            f_cur = drift(y, at_ivw, at_logq, ba, bb, b_ls)
            if (s + 1) % 2 == 1:
                f_odd = f_cur
            else:
                simp += (h / 3.0) * (f_even + 4.0 * f_odd + f_cur)
                f_even = f_cur
                r = abs(simp - (y - base))
                if r > resid:
                    resid = r
            d = abs(log_b - y)
            if d > sup:
                sup = d
        return y, simp, sup, resid

    return integrate_gap


drift_numpy = _drift_impl
integrate_gap_numpy = _make_integrate_gap(_drift_impl)

# ---------------------------------------------------------------------------
# backend wiring
# ---------------------------------------------------------------------------

absorption_dp_numpy = _absorption_dp_np
flow_numpy = _flow_np
jump_chunk_numpy = _jump_chunk_np

if NUMBA_AVAILABLE:
    _dp_nb = njit(cache=True, nogil=True)(_absorption_dp_loop)
    _flow_nb = njit(cache=True, nogil=True)(_flow_loop)
    _jump_nb = njit(cache=True, nogil=True)(_jump_chunk_loop)
    drift_numba = njit(cache=True, nogil=True)(_drift_impl)
    integrate_gap_numba = njit(cache=True, nogil=True)(_make_integrate_gap(drift_numba))
else:  # pragma: no cover - exercised via LCOAL_NO_NUMBA runs
    _dp_nb = None
    _flow_nb = None
    _jump_nb = None
    drift_numba = None
    integrate_gap_numba = None


def _ws_args(ws: Workspace):
    return (ws.km, ws.at_logw, ws.at_logp, ws.at_logq,
            ws.beta_logscale, ws.lgA, ws.lgB, ws.lgAB, ws.lg_int)


def absorption_dp(ws: Workspace, n: int, backend: str | None = None):
    """Hitting probabilities, last-jump law and log exit rates for start n."""
    if n > ws.nmax:
        raise ValueError(f"workspace sized for nmax={ws.nmax}, got n={n}")
    be = backend or ACTIVE_BACKEND
    if be == "numba":
        return _dp_nb(n, *_ws_args(ws))
    return _absorption_dp_np(ws, n)


def flow_accumulate(ws: Workspace, J: int, mu: np.ndarray, backend: str | None = None):
    """Incoming mass flow ``acc[i] = sum_{j>i} mu[j] rho_{ji}`` and exit rates."""
    if J > ws.nmax:
        raise ValueError(f"workspace sized for nmax={ws.nmax}, got J={J}")
    be = backend or ACTIVE_BACKEND
    if be == "numba":
        return _flow_nb(J, np.asarray(mu, dtype=np.float64), *_ws_args(ws))
    return _flow_np(ws, J, np.asarray(mu, dtype=np.float64))


def run_jump_chunk(tables: JumpTables, n0: int, u_holds, u_jumps, r_slots: int,
                   backend: str | None = None):
    """Simulate one block of embedded-chain paths from shared uniform buffers."""
    R = u_holds.shape[0]
    out_L = np.zeros(R, dtype=np.int64)
    out_T = np.zeros(R)
    out_nj = np.zeros(R, dtype=np.int64)
    out_ts = np.zeros((R, r_slots), dtype=np.int64)
    out_th = np.zeros((R, r_slots))
    be = backend or ACTIVE_BACKEND
    fn = _jump_nb if be == "numba" else _jump_chunk_np
    fn(n0, tables.offsets, tables.cdf, tables.rho_tot, u_holds, u_jumps,
       r_slots, out_L, out_T, out_nj, out_ts, out_th)
    return out_L, out_T, out_nj, out_ts, out_th


def integrate_gap(*args, backend: str | None = None):
    be = backend or ACTIVE_BACKEND
    if be == "numba":
        return integrate_gap_numba(*args)
    return integrate_gap_numpy(*args)
