"""Closed-form limit laws used as oracles.

The Beta-family limit of the last-merger size is a one-dimensional integral
per state with a removable singularity at 0; it is evaluated by adaptive
Gauss-Kronrod quadrature on a stabilized integrand (``expm1``/``log1p``
forms), with the generalized binomial weight carried by a positive
recurrence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.special import betaln

__all__ = ["LimitLaw", "beta_limit_law", "kingman_invariant", "beta_mu_from_limit"]


@dataclass(frozen=True)
class LimitLaw:
    """Limiting distribution of the last-merger size, truncated at J."""

    family: str
    probs: np.ndarray  # indexed by state, entries 2..J
    tail_bound: float

    def __post_init__(self) -> None:
        body = self.probs[2:]
        if (body < -1e-15).any():
            raise ValueError("limit-law probabilities must be nonnegative")
        if body.sum() > 1.0 + 1e-9:
            raise ValueError("limit-law probabilities must sum to at most 1")


def _limit_integral(alpha: float, i: int) -> float:
    """``int_0^1 x^(i-1) / (1 - (1-x)^(1-alpha)) dx`` (or the log form at 1)."""
    if alpha == 1.0:

        def ig(x: float) -> float:
            if x <= 0.0:
                return -1.0 if i == 2 else 0.0
            if x >= 1.0:
                return 0.0
            return x ** (i - 1) / math.log1p(-x)

    else:

        def ig(x: float) -> float:
            if x <= 0.0:
                return 1.0 / (1.0 - alpha) if i == 2 else 0.0
            if x >= 1.0:
                return 1.0 if alpha < 1.0 else 0.0
            return x ** (i - 1) / -math.expm1((1.0 - alpha) * math.log1p(-x))

    pts = (1.0 - 1.0 / i,) if i >= 50 else None
    val, _ = quad(ig, 0.0, 1.0, epsabs=1e-13, epsrel=1e-11, limit=400, points=pts)
    return val


def beta_limit_law(alpha: float, J: int) -> LimitLaw:
    """Limiting last-merger law for the Beta(2-alpha, alpha) family."""
    if not 0.0 < alpha < 2.0:
        raise ValueError(f"alpha must lie in (0, 2), got {alpha}")
    if J < 2:
        raise ValueError(f"need J >= 2, got {J}")
    probs = np.zeros(J + 1)
    if alpha == 1.0:
        for i in range(2, J + 1):
            probs[i] = -_limit_integral(alpha, i) / (i - 1)
    else:
        # signed weight alpha * binom(alpha-1, i-1) * (-1)^(i-1); its sign
        # matches the integral's, so each product is a probability
        w = alpha * (1.0 - alpha)
        for i in range(2, J + 1):
            probs[i] = w * _limit_integral(alpha, i)
            w *= (i - alpha) / i
    probs = np.clip(probs, 0.0, None)
    probs.flags.writeable = False
    return LimitLaw(family=f"beta({alpha:g})", probs=probs,
                    tail_bound=float(1.0 - probs.sum()))


def kingman_invariant(J: int) -> np.ndarray:
    """Invariant profile ``2 / (i (i - 1))`` for pairwise-only dynamics."""
    if J < 2:
        raise ValueError(f"need J >= 2, got {J}")
    i = np.arange(J + 1, dtype=np.float64)
    mu = np.zeros(J + 1)
    mu[2:] = 2.0 / (i[2:] * (i[2:] - 1.0))
    mu.flags.writeable = False
    return mu


def beta_mu_from_limit(alpha: float, J: int) -> np.ndarray:
    """Invariant weights ``P(L_inf = i) / lambda_{i,i}`` for the Beta family.

    The division is done in log space; ``lambda_{i,i}`` is the ratio of Beta
    functions ``B(i - alpha, alpha) / B(2 - alpha, alpha)``.
    """
    law = beta_limit_law(alpha, J)
    i = np.arange(2, J + 1, dtype=np.float64)
    log_lam_ii = betaln(i - alpha, alpha) - betaln(2.0 - alpha, alpha)
    mu = np.zeros(J + 1)
    with np.errstate(divide="ignore"):
        mu[2:] = np.exp(np.log(law.probs[2:]) - log_lam_ii)
    mu.flags.writeable = False
    return mu
