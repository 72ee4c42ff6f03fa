"""Merger rates, jump rates and the drift function of the block-counting chain.

For a measure with density/atom decomposition the rate of merging k out of b
blocks is an integral of ``p^(k-2) (1-p)^(b-k)`` against the measure.  The
point mass at 0 contributes only to pairwise mergers; atoms are evaluated
directly; the Beta component reduces to a ratio of Beta functions handled in
log space.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np
from scipy.special import digamma, gammaln, gammasgn

from . import kernels
from .measures import LambdaSpec, check_conditions

__all__ = [
    "RateRow",
    "lambda_bk",
    "log_lambda_bk",
    "rate_row",
    "transition_probs",
    "consistency_residual",
    "drift_f",
    "event_rate",
    "lambda_rows_by_recursion",
]

_ws_cache: dict[tuple, kernels.Workspace] = {}
_ws_lock = threading.Lock()


def workspace(spec: LambdaSpec, n: int) -> kernels.Workspace:
    """Shared per-measure table workspace, grown on demand."""
    key = (spec.kingman_mass, spec.atoms, spec.beta_component)
    with _ws_lock:
        ws = _ws_cache.get(key)
        if ws is None or ws.nmax < n:
            ws = kernels.make_workspace(spec, max(n, 256))
            _ws_cache[key] = ws
    return ws


@dataclass(frozen=True)
class RateRow:
    """All jump rates out of a state ``b``, in log space.

    ``log_lambda[k-2]`` is the log merger rate for ``k = 2..b``;
    ``log_rho[j-1]`` the log rate of the jump to ``j = 1..b-1``;
    ``log_event_rate`` is the log rate of effective events in the
    thinning construction (+inf marker when that rate diverges).
    """

    b: int
    log_lambda: np.ndarray
    log_rho: np.ndarray
    log_rho_total: float
    log_event_rate: float


def log_lambda_bk(spec: LambdaSpec, b: int, k: int) -> float:
    """Log merger rate for ``k`` of ``b`` blocks."""
    if not 2 <= k <= b:
        raise ValueError(f"need 2 <= k <= b, got k={k}, b={b}")
    ws = workspace(spec, b)
    return float(kernels.row_log_lambda(ws, b)[k - 2])


def lambda_bk(spec: LambdaSpec, b: int, k: int) -> float:
    """Merger rate for ``k`` of ``b`` blocks (linear space)."""
    return math.exp(log_lambda_bk(spec, b, k))


def rate_row(spec: LambdaSpec, b: int) -> RateRow:
    """Full rate row for state ``b``."""
    if b < 2:
        raise ValueError(f"need b >= 2, got {b}")
    ws = workspace(spec, b)
    log_lambda = kernels.row_log_lambda(ws, b)
    log_rho, tot = kernels.row_log_rho(ws, b)
    ev = event_rate(spec, b)
    log_ev = math.log(ev) if math.isfinite(ev) else math.inf
    log_lambda.flags.writeable = False
    log_rho.flags.writeable = False
    return RateRow(
        b=b,
        log_lambda=log_lambda,
        log_rho=log_rho,
        log_rho_total=float(tot),
        log_event_rate=log_ev,
    )


def transition_probs(spec: LambdaSpec, b: int) -> np.ndarray:
    """Embedded-chain transition probabilities from ``b`` to ``j = 1..b-1``."""
    ws = workspace(spec, b)
    log_rho, tot = kernels.row_log_rho(ws, b)
    return np.exp(log_rho - tot)


def consistency_residual(spec: LambdaSpec, b: int) -> float:
    """Max relative defect of the pairwise-addition recursion between
    consecutive rate rows (structurally zero entries skipped).

    Evaluated in log space: the entries themselves underflow linear doubles
    long before the log representation loses accuracy.
    """
    if b < 2:
        raise ValueError(f"need b >= 2, got {b}")
    ws = workspace(spec, b + 1)
    log_b = kernels.row_log_lambda(ws, b)
    log_b1 = kernels.row_log_lambda(ws, b + 1)
    worst = 0.0
    for k in range(2, b + 1):
        v = log_b[k - 2]
        if v == -math.inf:
            continue
        s = np.logaddexp(log_b1[k - 2], log_b1[k - 1])
        worst = max(worst, abs(-math.expm1(s - v)))
    return worst


def lambda_rows_by_recursion(spec: LambdaSpec, n: int) -> list[np.ndarray]:
    """All merger-rate rows for ``b = 2..n`` built top-down from the row at
    ``n`` by pairwise addition (linear space).

    Returns a list where entry ``b - 2`` is the row for ``b``.  Intended for
    cross-checks at moderate ``n``; the direct log-space path is the
    production route.
    """
    ws = workspace(spec, n)
    rows: list[np.ndarray] = [np.exp(kernels.row_log_lambda(ws, n))]
    for b in range(n - 1, 1, -1):
        prev = rows[-1]
        rows.append(prev[: b - 1] + prev[1:b])
    rows.reverse()
    return rows


def _beta_tail_diff(a: float, b: float, z: float) -> float:
    """``B(a-2, b) - B(a-2, b+z)`` by analytic continuation, valid a > 1, a != 2."""
    sg = gammasgn(a - 2.0)
    lg_a2 = gammaln(a - 2.0)
    v1 = sg * math.exp(lg_a2 + gammaln(b) - gammaln(a - 2.0 + b))
    v2 = sg * math.exp(lg_a2 + gammaln(b + z) - gammaln(a - 2.0 + b + z))
    return v1 - v2


def _adjusted_intensity(spec: LambdaSpec, z: float) -> float:
    """``int (1 - (1-p)^z) p^-2 dLambda`` for real ``z >= 1``; inf without dust."""
    report = check_conditions(spec)
    if not report.has_dust:
        return math.inf
    total = 0.0
    for p, w in spec.atoms:
        total += -w * math.expm1(z * math.log1p(-p)) / (p * p) if p < 1.0 else w
    if spec.has_beta:
        a, b, scale = spec.beta_component
        lb0 = gammaln(a) + gammaln(b) - gammaln(a + b)
        if a == 2.0:
            val = digamma(b + z) - digamma(b)
        else:
            val = _beta_tail_diff(a, b, z)
        total += scale * val * math.exp(-lb0)
    return total


def event_rate(spec: LambdaSpec, b: int) -> float:
    """Rate of effective thinning events when ``b`` blocks are extant.

    Finite exactly when the measure has a dust component; returns ``inf``
    otherwise.
    """
    if b < 1:
        raise ValueError(f"need b >= 1, got {b}")
    return _adjusted_intensity(spec, float(b))


def drift_f(spec: LambdaSpec, y: float) -> float:
    """Drift of the log block count: ``int (1-(1-p)^{e^y}) e^{-y} p^-2 dLambda``.

    Requires a dust component (which makes the integral finite for all y);
    nonincreasing in ``y`` with limit 0 at +inf.
    """
    report = check_conditions(spec)
    if not report.has_dust:
        raise ValueError("drift function requires a measure with dust "
                         "(finite inverse-p integral)")
    z = math.exp(y)
    return _adjusted_intensity(spec, z) * math.exp(-y)
