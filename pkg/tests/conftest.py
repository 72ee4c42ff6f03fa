import math

import numpy as np
import pytest
from scipy.stats import chisquare

from lcoal import LambdaSpec

E_INV = math.exp(-1)


def spec_battery():
    """20 measures covering every supported structural class."""
    return [
        LambdaSpec.kingman(),
        LambdaSpec.kingman(2.5),
        LambdaSpec.single_atom(0.3),
        LambdaSpec.single_atom(0.5, 2.0),
        LambdaSpec.eldon_wakeley(E_INV),
        LambdaSpec.single_atom(1.0),
        LambdaSpec(atoms=((0.2, 0.5), (0.8, 0.25))),
        LambdaSpec(atoms=((0.25, 1.0), (0.5, 1.0), (0.75, 1.0))),
        LambdaSpec(atoms=((0.5, 0.3), (1.0, 0.2))),
        LambdaSpec.beta_coalescent(0.5),
        LambdaSpec.bolthausen_sznitman(),
        LambdaSpec.beta_coalescent(1.5),
        LambdaSpec.beta_coalescent(0.25),
        LambdaSpec.beta_coalescent(1.75),
        LambdaSpec.beta(3.0, 2.0),
        LambdaSpec.beta(2.0, 1.0),
        LambdaSpec(kingman_mass=0.5, atoms=((0.6, 0.5),)),
        LambdaSpec(atoms=((0.9, 0.3),), beta_component=(1.2, 0.8, 0.7)),
        LambdaSpec(kingman_mass=1.0, beta_component=(1.0, 1.0, 0.5)),
        LambdaSpec(atoms=((0.05, 0.2), (0.95, 0.8))),
    ]


@pytest.fixture(scope="session")
def battery():
    return spec_battery()


def chi2_vs_law(counts: np.ndarray, probs: np.ndarray, total: int,
                min_expected: float = 5.0):
    """Goodness-of-fit p-value of observed counts against an exact law.

    Cells with small expectation are pooled; returns (stat, pvalue, df).
    """
    expected = probs * total
    keep = expected >= min_expected
    f_obs = list(counts[keep].astype(float))
    f_exp = list(expected[keep])
    rest_obs = float(counts[~keep].sum())
    rest_exp = float(expected[~keep].sum()) + total * max(0.0, 1.0 - probs.sum())
    if rest_exp > 0 or rest_obs > 0:
        f_obs.append(rest_obs)
        f_exp.append(max(rest_exp, 1e-12))
    if len(f_obs) < 2:
        return 0.0, 1.0, 0
    f_exp = np.array(f_exp) * (sum(f_obs) / np.sum(f_exp))
    stat, p = chisquare(np.array(f_obs), f_exp)
    return float(stat), float(p), len(f_obs) - 1
