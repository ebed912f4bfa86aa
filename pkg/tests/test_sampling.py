import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from foldtail.errors import NoThresholdMass, OutOfRange
from foldtail.jumpmap import BranchSpec, LossMap
from foldtail.sampling import (AlphaDistribution, cdf, exceedance_probability, quantile,
                               sample_alphas, sample_losses, uniform_stream)

FAMILIES = [
    AlphaDistribution.uniform(-0.5, 1.5),
    AlphaDistribution.truncated_normal(0.2, 0.7, -1.0, 2.0),
    AlphaDistribution.exponential(1.5, -0.3),
    AlphaDistribution.pareto(1.0, 2.0, -0.5),
]


def test_cdf_examples():
    assert cdf(AlphaDistribution.uniform(0, 1), 0.25) == 0.25
    assert cdf(AlphaDistribution.pareto(1.0, 2.0, 0.0), 2.0) == 0.75
    assert cdf(AlphaDistribution.exponential(1.0, 0.0), 0.0) == 0.0


def test_quantile_examples():
    assert quantile(AlphaDistribution.uniform(2, 4), 0.5) == 3.0
    assert quantile(AlphaDistribution.exponential(2.0, 1.0), 1 - math.exp(-2)) == pytest.approx(2.0, rel=1e-14)
    for dist in FAMILIES:
        for q in (0.0, 1.0, -0.1, 1.5):
            with pytest.raises(OutOfRange):
                dist.quantile(q)


def test_exceedance_examples():
    uni = AlphaDistribution.uniform(0, 1)
    assert exceedance_probability(uni, 0.9) == pytest.approx(0.1, rel=1e-14)
    assert exceedance_probability(uni, 2.0) == 0.0
    tn = AlphaDistribution.truncated_normal(0, 1, -3, 3)
    assert exceedance_probability(tn, 0.0) == pytest.approx(0.5, abs=1e-15)


def test_named_parameters():
    d = AlphaDistribution.pareto(1.0, 3.0, 0.5)
    assert (d.scale, d.tail_index, d.shift) == (1.0, 3.0, 0.5)
    with pytest.raises(AttributeError):
        d.rate


@pytest.mark.parametrize("dist", FAMILIES, ids=lambda d: d.family.value)
@given(q=st.floats(1e-6, 1 - 1e-6))
@settings(max_examples=200, deadline=None)
def test_quantile_cdf_round_trip(dist, q):
    x = dist.quantile(q)
    assert abs(dist.quantile(dist.cdf(x)) - x) <= 1e-10 * (1 + abs(x))


@pytest.mark.parametrize("dist", FAMILIES, ids=lambda d: d.family.value)
@given(t=st.floats(-10, 50))
@settings(max_examples=200, deadline=None)
def test_exceedance_plus_cdf_is_one(dist, t):
    assert dist.exceedance_probability(t) + dist.cdf(t) == 1.0


@pytest.mark.parametrize("dist", FAMILIES, ids=lambda d: d.family.value)
def test_cdf_nondecreasing(dist):
    x = np.linspace(-3, 30, 5001)
    assert np.all(np.diff(dist.cdf(x)) >= 0)


@pytest.mark.parametrize("dist", FAMILIES, ids=lambda d: d.family.value)
def test_density_integrates_to_one(dist):
    lo, hi = dist.support
    cut = 0.0
    if not math.isfinite(hi):
        cut = 1e-9
        hi = dist.quantile(1 - cut)
    if dist.family.value == "Pareto":
        x = lo + np.geomspace(1e-3, hi - lo, 10_000) - 1e-3
    else:
        x = np.linspace(lo, hi, 10_000)
    total = np.trapezoid(dist.density(x), x)
    assert total + cut == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("dist", FAMILIES, ids=lambda d: d.family.value)
def test_sampled_alpha_ks(dist):
    a = sample_alphas(dist, 100_000, seed=99)
    stat = stats.kstest(a, dist.cdf).statistic
    assert stat <= 1.95 / math.sqrt(1e5)


def test_uniform_stream_open_interval_and_chunking():
    u = uniform_stream(5, 0, 10_000)
    assert u.min() > 0 and u.max() < 1
    for a, b in [(0, 1), (3, 17), (4, 8), (1001, 5003), (9999, 10_000)]:
        assert np.array_equal(uniform_stream(5, a, b), u[a:b])


@given(st.integers(0, 2 ** 64 - 1), st.integers(0, 10 ** 12), st.integers(1, 50))
@settings(max_examples=100, deadline=None)
def test_uniform_stream_index_addressable(seed, start, length):
    whole = uniform_stream(seed, start, start + length)
    k = length // 2
    assert np.array_equal(np.concatenate([uniform_stream(seed, start, start + k),
                                          uniform_stream(seed, start + k, start + length)]), whole)


def test_seed_range():
    with pytest.raises(ValueError):
        uniform_stream(-1, 0, 1)
    with pytest.raises(ValueError):
        uniform_stream(2 ** 64, 0, 1)


def test_sample_losses_deterministic(scenario_a):
    spec, lm, dist = scenario_a
    first = sample_losses(dist, spec, lm, 4, seed=123)
    again = sample_losses(dist, spec, lm, 4, seed=123)
    assert first == again
    assert first.alphas.tobytes() == again.alphas.tobytes()
    assert sample_losses(dist, spec, lm, 4, seed=124) != first


def test_sample_losses_worker_independent(scenario_a):
    spec, lm, dist = scenario_a
    one = sample_losses(dist, spec, lm, 300_000, seed=7, workers=1)
    many = sample_losses(dist, spec, lm, 300_000, seed=7, workers=8)
    assert one == many


def test_batch_losses_match_scalar_loss(scenario_a):
    from foldtail.jumpmap import loss
    spec, lm, dist = scenario_a
    b = sample_losses(dist, spec, lm, 2000, seed=1)
    assert all(b.losses[i] == loss(spec, lm, b.alphas[i]) for i in range(b.n))


def test_no_threshold_mass():
    with pytest.raises(NoThresholdMass):
        sample_losses(AlphaDistribution.uniform(-1, -0.5), BranchSpec("Bounded", 1.0, 1.0, 0.0),
                      LossMap(1.0), 10, seed=0)


def test_nonzero_loss_fraction():
    dist = AlphaDistribution.uniform(0, 1)
    spec = BranchSpec("Bounded", 1.0, 1.0, 0.5)
    b = sample_losses(dist, spec, LossMap(1.0), 1_000_000, seed=2024)
    frac = np.count_nonzero(b.losses > 0) / b.n
    assert abs(frac - 0.5) <= 0.002


@pytest.mark.parametrize("dist", FAMILIES, ids=lambda d: d.family.value)
def test_empirical_crossing_probability(dist):
    spec = BranchSpec("Bounded", 1.0, 1.0, 0.6)
    n = 1_000_000
    b = sample_losses(dist, spec, LossMap(1.0), n, seed=31)
    p = dist.exceedance_probability(spec.alpha_c)
    se = math.sqrt(p * (1 - p) / n)
    assert abs(np.count_nonzero(b.losses > 0) / n - p) <= 3 * se


def test_fluctuation_driven_survival(scenario_a):
    spec, lm, dist = scenario_a
    n = 1_000_000
    b = sample_losses(dist, spec, lm, n, seed=77)
    for y in (10.0, 100.0, 1000.0):
        s = np.count_nonzero(b.losses > y) / n
        se = y * math.sqrt((1 / y) * (1 - 1 / y) / n)
        assert abs(s * y - 1) <= 3 * se
