import math

import numpy as np
import pytest

from lcoal import (
    LambdaSpec,
    absorption_profile,
    invariant_from_profiles,
    kingman_invariant,
    residual_check,
)

from conftest import E_INV


def test_kingman_closed_form():
    inv = invariant_from_profiles(LambdaSpec.kingman(), [500, 1000], J=250)
    assert inv.verdict == "converged"
    i = np.arange(2, 251, dtype=float)
    np.testing.assert_allclose(inv.mu[2:], 2 / (i * (i - 1)), atol=1e-14)
    assert inv.normalization == pytest.approx(1.0, abs=1e-12)
    assert inv.sup_rel_diff == 0.0


def test_star_diverges():
    inv = invariant_from_profiles(LambdaSpec.single_atom(1.0), [100, 200, 400], J=50)
    assert inv.verdict == "diverging_to_infinity"


def test_eldon_wakeley_non_convergent():
    # mixed geometric offsets keep the profiles phase-shifted
    sched = [round(math.exp(m + c)) for m, c in ((5, 0.0), (5, 0.5), (6, 0.0), (6, 0.5))]
    inv = invariant_from_profiles(LambdaSpec.eldon_wakeley(E_INV), sorted(sched), J=40)
    assert inv.verdict == "non_convergent"
    assert inv.sup_rel_diff > 1e-3


def test_schedule_validation():
    spec = LambdaSpec.kingman()
    with pytest.raises(ValueError, match="schedule too short"):
        invariant_from_profiles(spec, [100, 200], J=100)
    with pytest.raises(ValueError, match="increasing"):
        invariant_from_profiles(spec, [200, 100], J=10)
    with pytest.raises(ValueError, match="increasing"):
        invariant_from_profiles(spec, [200], J=10)


def test_kingman_residual_closed_form():
    mu = kingman_invariant(500)
    rep = residual_check(LambdaSpec.kingman(), mu, J=500)
    assert rep.max_rel_residual <= 1e-10
    assert rep.normalization == pytest.approx(1.0, rel=1e-12)


def test_raw_profile_residual_is_tiny(battery):
    # the exact flow-balance identity of the hitting profile
    for spec in battery[:10]:
        prof = absorption_profile(spec, 300)
        mu = prof.mu_profile
        if (mu[2:301] <= 0).any():  # star-type profiles have empty interior
            continue
        rep = residual_check(spec, mu, J=300)
        assert rep.max_rel_residual <= 1e-8, spec


def test_converged_estimate_self_consistent():
    spec = LambdaSpec.bolthausen_sznitman()
    tol = 0.05
    inv = invariant_from_profiles(spec, [500, 1000], J=120, tolerance=tol)
    assert inv.verdict == "converged"
    rep = residual_check(spec, inv.mu_full, J=inv.n_max)
    assert rep.max_rel_residual <= 10 * tol


def test_perturbed_mu_detected():
    mu = kingman_invariant(200).copy()
    mu[50] *= 1.5
    rep = residual_check(LambdaSpec.kingman(), mu, J=200)
    assert rep.max_rel_residual > 0.1


def test_residual_check_validation():
    mu = kingman_invariant(100)
    with pytest.raises(ValueError, match="positive"):
        bad = mu.copy()
        bad[10] = 0.0
        residual_check(LambdaSpec.kingman(), bad, J=100)
    with pytest.raises(ValueError):
        residual_check(LambdaSpec.kingman(), mu[:50], J=100)
