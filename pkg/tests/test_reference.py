import math

import numpy as np
import pytest

from lcoal import (
    LambdaSpec,
    beta_limit_law,
    beta_mu_from_limit,
    kingman_invariant,
    lambda_bk,
    residual_check,
)

import oracles


def test_kingman_invariant_values():
    mu = kingman_invariant(10)
    assert mu[2] == 1.0
    assert mu[3] == pytest.approx(1.0 / 3.0)
    # only the pairwise state feeds absorption: mu_2 * lambda_{2,2} = 1
    assert mu[2] * lambda_bk(LambdaSpec.kingman(), 2, 2) == pytest.approx(1.0)


def test_limit_law_alpha_one_first_weight():
    # -int_0^1 x / log(1-x) dx evaluates to log 2
    law = beta_limit_law(1.0, 10)
    assert law.probs[2] == pytest.approx(math.log(2.0), rel=1e-10)


def test_limit_integrals_against_second_scheme():
    for alpha in (0.5, 1.0, 1.5):
        for i in (2, 3, 10, 47):
            from lcoal.reference import _limit_integral

            mine = _limit_integral(alpha, i)
            ref = float(oracles.mp_limit_integral(alpha, i))
            assert mine == pytest.approx(ref, rel=1e-9), (alpha, i)


def test_limit_law_probabilities_valid():
    for alpha in (0.25, 0.5, 1.0, 1.5, 1.75):
        law = beta_limit_law(alpha, 120)
        assert (law.probs >= 0).all()
        assert law.probs[2:].sum() <= 1.0 + 1e-12
        assert law.tail_bound >= -1e-12


def test_tail_shrinks_with_support():
    for alpha in (0.5, 1.0, 1.5):
        tails = [beta_limit_law(alpha, J).tail_bound for J in (25, 50, 100, 200)]
        assert all(b < a for a, b in zip(tails, tails[1:]))
    # the tail at J=200 is below 1e-2 once the law has a second moment
    for alpha in (1.0, 1.5):
        assert beta_limit_law(alpha, 200).tail_bound < 1e-2


def test_alpha_range_validation():
    with pytest.raises(ValueError):
        beta_limit_law(0.0, 50)
    with pytest.raises(ValueError):
        beta_limit_law(2.0, 50)


def test_mu_from_limit_divides_diagonal():
    alpha = 1.0
    law = beta_limit_law(alpha, 60)
    mu = beta_mu_from_limit(alpha, 60)
    # for the uniform measure lambda_{2,2} = 1, so mu_2 = P(2)
    assert mu[2] == pytest.approx(law.probs[2], rel=1e-12)
    assert (mu[2:] > 0).all()
    spec = LambdaSpec.beta_coalescent(alpha)
    for i in (3, 17, 41):
        assert mu[i] == pytest.approx(law.probs[i] / lambda_bk(spec, i, i),
                                      rel=1e-10)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
def test_limit_mu_nearly_invariant(alpha):
    # cross-module check: limit-law weights balance the flow up to the
    # truncated tail, which scales like J^-alpha
    spec = LambdaSpec.beta_coalescent(alpha)
    residuals = []
    for J in (200, 400, 800):
        mu = beta_mu_from_limit(alpha, J)
        rep = residual_check(spec, mu, J=J)
        assert rep.max_rel_residual <= 2.0 * J ** (-alpha)
        residuals.append(rep.max_rel_residual)
    assert residuals[2] < residuals[1] < residuals[0]
