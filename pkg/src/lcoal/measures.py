"""Driving measures for multiple-merger coalescents and their structural conditions.

A measure is described symbolically as a point mass at 0, a list of atoms on
(0, 1], and an optional scaled Beta density.  Every integral the rest of the
package needs is then either closed form or a one-dimensional quadrature.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.special import digamma

__all__ = [
    "LambdaSpec",
    "ConditionReport",
    "check_conditions",
]

_LATTICE_RATIO_TOL = 1e-9
_LATTICE_MAX_DENOMINATOR = 10**6


@dataclass(frozen=True)
class LambdaSpec:
    """Symbolic description of a finite measure on [0, 1].

    Attributes
    ----------
    kingman_mass : float
        Point mass at 0.
    atoms : tuple[tuple[float, float], ...]
        Atoms ``(position, mass)`` with positions strictly increasing in
        (0, 1] and masses > 0.
    beta_component : tuple[float, float, float] | None
        ``(a, b, scale)`` for ``scale`` times a Beta(a, b) density on (0, 1).
    """

    kingman_mass: float = 0.0
    atoms: tuple[tuple[float, float], ...] = ()
    beta_component: tuple[float, float, float] | None = None

    def __post_init__(self) -> None:
        if self.kingman_mass < 0:
            raise ValueError("point mass at 0 must be nonnegative")
        atoms = tuple((float(p), float(w)) for p, w in self.atoms)
        object.__setattr__(self, "atoms", atoms)
        last = 0.0
        for p, w in atoms:
            if not 0.0 < p <= 1.0:
                raise ValueError(f"atom position {p} outside (0, 1]")
            if p <= last:
                raise ValueError("atom positions must be strictly increasing")
            if w <= 0:
                raise ValueError(f"atom mass {w} must be positive")
            last = p
        if self.beta_component is not None:
            a, b, scale = self.beta_component
            if a <= 0 or b <= 0:
                raise ValueError("Beta parameters must be positive")
            if scale < 0:
                raise ValueError("Beta scale must be nonnegative")
            object.__setattr__(
                self, "beta_component", (float(a), float(b), float(scale))
            )
        if self.total_mass <= 0:
            raise ValueError("measure must have positive total mass")

    @property
    def total_mass(self) -> float:
        m = self.kingman_mass + sum(w for _, w in self.atoms)
        if self.beta_component is not None:
            m += self.beta_component[2]
        return m

    @property
    def has_beta(self) -> bool:
        return self.beta_component is not None and self.beta_component[2] > 0

    @property
    def is_atomic(self) -> bool:
        """True when all mass sits in atoms on (0, 1]."""
        return self.kingman_mass == 0 and not self.has_beta and bool(self.atoms)

    # -- common families -------------------------------------------------

    @classmethod
    def kingman(cls, mass: float = 1.0) -> "LambdaSpec":
        return cls(kingman_mass=mass)

    @classmethod
    def single_atom(cls, p: float, mass: float = 1.0) -> "LambdaSpec":
        return cls(atoms=((p, mass),))

    @classmethod
    def eldon_wakeley(cls, p: float) -> "LambdaSpec":
        """Single atom at ``p`` with mass ``p**2``."""
        return cls(atoms=((p, p * p),))

    @classmethod
    def beta(cls, a: float, b: float, scale: float = 1.0) -> "LambdaSpec":
        return cls(beta_component=(a, b, scale))

    @classmethod
    def beta_coalescent(cls, alpha: float) -> "LambdaSpec":
        """Beta(2 - alpha, alpha) measure, 0 < alpha < 2."""
        if not 0.0 < alpha < 2.0:
            raise ValueError("alpha must lie in (0, 2)")
        return cls.beta(2.0 - alpha, alpha)

    @classmethod
    def bolthausen_sznitman(cls) -> "LambdaSpec":
        return cls.beta(1.0, 1.0)

    # -- JSON wire format -------------------------------------------------

    @classmethod
    def from_dict(cls, d: dict) -> "LambdaSpec":
        """Build from ``{"kingman": m, "atoms": [[p, w], ...], "beta": {...}}``."""
        known = {"kingman", "atoms", "beta"}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown measure keys: {sorted(unknown)}")
        beta = d.get("beta")
        beta_component = None
        if beta is not None:
            beta_component = (beta["a"], beta["b"], beta.get("scale", 1.0))
        return cls(
            kingman_mass=float(d.get("kingman", 0.0)),
            atoms=tuple((float(p), float(w)) for p, w in d.get("atoms", [])),
            beta_component=beta_component,
        )

    @classmethod
    def from_json(cls, text: str) -> "LambdaSpec":
        return cls.from_dict(json.loads(text))

    def to_dict(self) -> dict:
        d: dict = {}
        if self.kingman_mass > 0:
            d["kingman"] = self.kingman_mass
        if self.atoms:
            d["atoms"] = [[p, w] for p, w in self.atoms]
        if self.beta_component is not None:
            a, b, scale = self.beta_component
            d["beta"] = {"a": a, "b": b, "scale": scale}
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


@dataclass(frozen=True)
class ConditionReport:
    """Structural properties of a measure relevant to block-counting dynamics.

    ``log_nonlattice`` is a trichotomy: "yes", "no" (a geometric grid carries
    all the mass on (0, 1]), or "undecided" when the numeric commensurability
    test is inconclusive.  It is advisory and never gates computation.
    """

    has_dust: bool
    log_condition: bool
    log_one_minus_p_integral: float
    inverse_p_integral: float
    intensity_integral: float
    log_nonlattice: str


def _lattice_verdict(spec: LambdaSpec) -> str:
    """Commensurability test for {-log(1-p_i)} over the interior atoms."""
    if spec.has_beta:
        return "yes"
    interior = [(p, w) for p, w in spec.atoms if p < 1.0]
    mass_at_one = sum(w for p, w in spec.atoms if p == 1.0)
    if mass_at_one > 0:
        # no grid point 1 - e^{-zd} ever reaches 1, so that mass always escapes
        return "yes"
    if not interior:
        # nothing on (0, 1]: the defining strict inequality fails vacuously
        return "no"
    base = -math.log1p(-interior[0][0])
    for p, _ in interior:
        r = -math.log1p(-p) / base
        frac = Fraction(r).limit_denominator(_LATTICE_MAX_DENOMINATOR)
        # scale the tolerance by the denominator: any float sits within
        # ~1/q^2 of some fraction, so a flat cutoff would never say no
        tol = _LATTICE_RATIO_TOL / max(frac.denominator, 1)
        if abs(r - float(frac)) > tol:
            return "undecided"
    return "no"


def check_conditions(spec: LambdaSpec) -> ConditionReport:
    """Decide integrability and lattice structure of the measure.

    All finiteness verdicts are exact for the supported measure classes:
    atoms contribute finite sums, the point mass at 0 forces the inverse
    moments to diverge, and the Beta component has closed-form moments.

    Parameters
    ----------
    spec : LambdaSpec
        Measure to analyse; must have positive total mass.

    Returns
    -------
    ConditionReport
    """
    if spec.total_mass <= 0:
        raise ValueError("measure must have positive total mass")

    log_int = 0.0
    inv_int = 0.0
    intensity = 0.0

    for p, w in spec.atoms:
        if p == 1.0:
            log_int = math.inf
        else:
            log_int += w * (-math.log1p(-p))
        inv_int += w / p
        intensity += w / (p * p)

    if spec.kingman_mass > 0:
        inv_int = math.inf
        intensity = math.inf

    if spec.has_beta:
        a, b, scale = spec.beta_component
        # E[-log(1-P)] for Beta(a, b)
        log_int += scale * (digamma(a + b) - digamma(b))
        if a > 1:
            inv_int += scale * (a + b - 1) / (a - 1)
        else:
            inv_int = math.inf
        if a > 2:
            intensity += scale * (a + b - 1) * (a + b - 2) / ((a - 1) * (a - 2))
        else:
            intensity = math.inf

    return ConditionReport(
        has_dust=math.isfinite(inv_int),
        log_condition=math.isfinite(log_int),
        log_one_minus_p_integral=log_int,
        inverse_p_integral=inv_int,
        intensity_integral=intensity,
        log_nonlattice=_lattice_verdict(spec),
    )
