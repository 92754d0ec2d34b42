import math

import numpy as np
import pytest
from scipy import stats as scipy_stats
from scipy.special import kolmogorov, ndtr, ndtri

from dynclu.errors import InvalidParameter, SampleTooSmall
from dynclu.stats_tests import (
    histogram_density,
    kolmogorov_sf,
    ks_normality,
    ks_two_sample,
    qq_points,
)


# --- Kolmogorov tail ----------------------------------------------------------


def test_kolmogorov_sf_against_scipy():
    for x in (0.05, 0.3, 0.5, 0.8, 1.0, 1.36, 2.0, 3.0):
        assert kolmogorov_sf(x) == pytest.approx(float(kolmogorov(x)), abs=1e-10)
    assert kolmogorov_sf(0.0) == 1.0
    assert kolmogorov_sf(-1.0) == 1.0


# --- two-sample test ----------------------------------------------------------


def test_ks_identical_samples(rng):
    a = rng.normal(size=50)
    verdict = ks_two_sample(a, a.copy())
    assert verdict.statistic == 0.0
    assert verdict.p_value == 1.0
    assert not verdict.reject


def test_ks_separated_samples(rng):
    a = rng.normal(0.0, 1.0, size=1000)
    b = rng.normal(10.0, 1.0, size=1000)
    verdict = ks_two_sample(a, b, level=0.05)
    assert verdict.statistic > 0.99
    assert verdict.reject


def test_ks_symmetry(rng):
    a = rng.normal(size=120)
    b = rng.exponential(size=80)
    v1 = ks_two_sample(a, b)
    v2 = ks_two_sample(b, a)
    assert v1.statistic == v2.statistic
    assert v1.p_value == v2.p_value


def test_ks_statistic_matches_scipy(rng):
    for _ in range(5):
        a = rng.normal(size=137)
        b = rng.normal(0.15, 1.2, size=83)
        mine = ks_two_sample(a, b)
        ref = scipy_stats.ks_2samp(a, b, method="asymp")
        assert mine.statistic == pytest.approx(ref.statistic, abs=1e-14)
        # same statistic pushed through the pinned asymptotic tail
        ne = 137 * 83 / 220
        assert mine.p_value == pytest.approx(
            float(kolmogorov(math.sqrt(ne) * mine.statistic)), abs=1e-12
        )


def test_ks_ties_handled(rng):
    a = np.repeat([1.0, 2.0, 3.0], 10)
    b = np.repeat([1.0, 2.0, 4.0], 10)
    verdict = ks_two_sample(a, b)
    # exact ECDF gap at x in [3, 4): 1.0 vs 2/3
    assert verdict.statistic == pytest.approx(1.0 / 3.0, abs=1e-14)


def test_ks_validation(rng):
    a = rng.normal(size=4)
    b = rng.normal(size=50)
    with pytest.raises(SampleTooSmall):
        ks_two_sample(a, b)
    with pytest.raises(InvalidParameter):
        ks_two_sample(rng.normal(size=10), rng.normal(size=10), level=0.7)


def test_ks_level_calibration():
    # same-distribution pairs rejected at close to the nominal level
    rng = np.random.default_rng(314159)
    rejections = 0
    trials = 2000
    for _ in range(trials):
        a = rng.normal(size=500)
        b = rng.normal(size=500)
        rejections += ks_two_sample(a, b, level=0.05).reject
    assert 0.03 <= rejections / trials <= 0.07


def test_ks_normality_one_sample(rng):
    x = rng.normal(2.0, 3.0, size=400)
    verdict = ks_normality(x, 2.0, 3.0, level=0.01)
    assert not verdict.reject
    shifted = ks_normality(x + 10.0, 2.0, 3.0, level=0.01)
    assert shifted.reject
    # statistic agrees with scipy's one-sample KS
    ref = scipy_stats.kstest(x, lambda v: ndtr((v - 2.0) / 3.0))
    assert verdict.statistic == pytest.approx(ref.statistic, abs=1e-12)


# --- QQ points ----------------------------------------------------------------


def test_qq_exact_quantile_sample():
    n = 40
    probs = (np.arange(1, n + 1) - 0.5) / n
    sample = 1.5 + 2.0 * ndtri(probs)
    points = qq_points(sample, 1.5, 2.0)
    assert np.allclose(points[:, 0], points[:, 1], atol=1e-12)


def test_qq_three_point_example():
    points = qq_points(np.array([0.0, 1.0, 2.0]), 1.0, 1.0)
    expected = np.array([1.0 + ndtri(1.0 / 6.0), 1.0, 1.0 + ndtri(5.0 / 6.0)])
    assert np.allclose(points[:, 0], expected, atol=1e-9)
    assert np.allclose(points[:, 1], [0.0, 1.0, 2.0])


def test_qq_monotone(rng):
    points = qq_points(rng.exponential(size=333), 1.0, 1.0)
    assert np.all(np.diff(points[:, 0]) >= 0)
    assert np.all(np.diff(points[:, 1]) >= 0)


def test_qq_heavy_tail_deviates_above(rng):
    # top percentile of a Pareto sample sits above the fitted normal line
    x = rng.pareto(2.0, size=5000)
    points = qq_points(x, float(np.mean(x)), float(np.std(x, ddof=1)))
    top = points[-50:]
    assert np.all(top[:, 1] >= top[:, 0])


def test_qq_validation(rng):
    with pytest.raises(InvalidParameter):
        qq_points(rng.normal(size=10), 0.0, 0.0)
    with pytest.raises(SampleTooSmall):
        qq_points(np.array([]), 0.0, 1.0)


# --- histogram ----------------------------------------------------------------


def test_histogram_flat_on_uniform_grid():
    sample = np.linspace(0.0, 1.0, 1001)
    centers, density = histogram_density(sample, 10)
    assert np.allclose(density, 1.0, rtol=2e-2)
    assert centers.size == 10


def test_histogram_normalization(rng):
    sample = rng.normal(size=4321)
    centers, density = histogram_density(sample, 37)
    width = centers[1] - centers[0]
    assert float(np.sum(density) * width) == pytest.approx(1.0, abs=1e-12)


def test_histogram_matches_normal_density(rng):
    sample = rng.normal(size=10**6)
    centers, density = histogram_density(sample, 50)
    phi = np.exp(-0.5 * centers**2) / math.sqrt(2.0 * math.pi)
    assert float(np.max(np.abs(density - phi))) < 0.01


def test_histogram_degenerate_sample():
    centers, density = histogram_density(np.full(10, 3.0), 5)
    width = max(1e-12, 3.0 * 1e-9)
    assert centers.tolist() == [3.0]
    assert density[0] == pytest.approx(1.0 / width)


def test_histogram_validation(rng):
    with pytest.raises(InvalidParameter):
        histogram_density(rng.normal(size=10), 0)
