import math

import mpmath as mp
import numpy as np
import pytest
from scipy import integrate
from scipy.special import gammaincinv

from dynclu.errors import InfiniteMean, InvalidParameter, InversionFailure
from dynclu.lifetimes import Exponential, Pareto, Weibull, _gammainc_inverse


def series_weibull_lst(lam, alpha, s, terms=80):
    # power-series oracle, valid for alpha >= 1 and small s; the argument
    # is -s * lam^(-1/alpha) under the tail convention exp(-lam t^alpha)
    z = -s * lam ** (-1.0 / alpha)
    return sum(z**n / math.factorial(n) * math.gamma(1.0 + n / alpha) for n in range(terms))


def mpmath_pareto_lst(c, alpha, s):
    # closed form with the upper incomplete gamma function
    value = mp.mpf(alpha) * mp.mpf(c) ** alpha * mp.e ** (s * c) * mp.mpf(s) ** alpha
    return float(value * mp.gammainc(-alpha, s * c))


# --- means -------------------------------------------------------------------


def test_means():
    assert Exponential(rate=2.0).mean() == pytest.approx(0.5)
    assert Weibull(scale=1.0, shape=1.0).mean() == pytest.approx(1.0)
    assert Pareto(scale=1.0, shape=2.0).mean() == pytest.approx(1.0)
    assert Weibull(scale=2.0, shape=2.0).mean() == pytest.approx(
        2.0 ** (-0.5) * math.gamma(1.5), rel=1e-14
    )


def test_infinite_mean_rejected():
    with pytest.raises(InfiniteMean):
        Pareto(scale=1.0, shape=1.0)
    with pytest.raises(InfiniteMean):
        Pareto(scale=1.0, shape=0.5)


def test_invalid_parameters():
    with pytest.raises(InvalidParameter):
        Exponential(rate=0.0)
    with pytest.raises(InvalidParameter):
        Weibull(scale=-1.0, shape=1.0)
    with pytest.raises(InvalidParameter):
        Weibull(scale=1.0, shape=0.0)
    with pytest.raises(InvalidParameter):
        Exponential(rate=1.0).lst(-0.5)
    with pytest.raises(InvalidParameter):
        Exponential(rate=1.0).lst_derivative(0.0)


# --- transforms --------------------------------------------------------------


def test_exponential_lst_closed_form():
    d = Exponential(rate=1.0)
    assert d.lst(1.0) == pytest.approx(0.5, rel=1e-15)
    assert d.lst(0.0) == 1.0
    assert d.lst_derivative(1.0) == pytest.approx(-0.25, rel=1e-15)


@pytest.mark.parametrize("dist", [
    Exponential(rate=1.3),
    Weibull(scale=1.0, shape=2.0),
    Weibull(scale=0.8, shape=0.6),
    Pareto(scale=1.0, shape=2.0),
])
def test_lst_at_zero_is_one(dist):
    assert dist.lst(0.0) == pytest.approx(1.0, abs=1e-12)


def test_weibull_lst_against_series_oracle():
    d = Weibull(scale=1.0, shape=2.0)
    assert d.lst(1.0) == pytest.approx(series_weibull_lst(1.0, 2.0, 1.0), abs=1e-8)
    for alpha in (1.5, 2.0, 3.0):
        for s in (0.25, 0.5, 1.0):
            d = Weibull(scale=1.0, shape=alpha)
            assert d.lst(s) == pytest.approx(series_weibull_lst(1.0, alpha, s), abs=1e-8)
    # alpha = 1 reduces to the exponential
    d = Weibull(scale=1.0, shape=1.0)
    assert d.lst(0.4) == pytest.approx(1.0 / 1.4, abs=1e-10)


def test_weibull_lst_small_shape_against_quadrature_oracle():
    lam, alpha, s = 1.0, 0.6, 1.0
    d = Weibull(scale=lam, shape=alpha)
    oracle, err = integrate.quad(
        lambda t: math.exp(-s * t) * lam * alpha * t ** (alpha - 1.0) * math.exp(-lam * t**alpha),
        0.0,
        200.0,
        epsabs=1e-13,
        limit=400,
        points=[1e-6, 1e-3, 0.1],
    )
    assert err < 5e-9
    assert d.lst(s) == pytest.approx(oracle, abs=1e-8)


@pytest.mark.parametrize("c,alpha", [(1.0, 1.5), (1.0, 2.0), (1.0, 3.0), (2.0, 2.5)])
def test_pareto_lst_against_incomplete_gamma_closed_form(c, alpha):
    d = Pareto(scale=c, shape=alpha)
    for s in (0.1, 0.5, 1.0, 2.0, 10.0):
        assert d.lst(s) == pytest.approx(mpmath_pareto_lst(c, alpha, s), abs=1e-8)


def test_lst_complete_monotonicity_spot_checks():
    grid = np.linspace(0.1, 10.0, 34)
    for dist in (
        Exponential(rate=0.7),
        Weibull(scale=1.0, shape=1.6),
        Weibull(scale=1.0, shape=0.8),
        Pareto(scale=1.0, shape=2.2),
    ):
        values = np.array([dist.lst(float(s)) for s in grid])
        assert np.all(values > 0) and np.all(values <= 1.0)
        assert np.all(np.diff(values) < 0)
        assert np.all(np.diff(values, 2) > -1e-12)  # convexity


@pytest.mark.parametrize("dist,s", [
    (Exponential(rate=1.0), 1.0),
    (Exponential(rate=0.5), 2.5),
    (Weibull(scale=1.0, shape=2.0), 1.0),
    (Weibull(scale=1.0, shape=0.7), 0.6),
    (Pareto(scale=1.0, shape=2.0), 1.0),
    (Pareto(scale=2.0, shape=2.5), 0.7),
])
def test_lst_derivative_matches_finite_differences(dist, s):
    h = 1e-5 * s
    fd = (dist.lst(s + h) - dist.lst(s - h)) / (2.0 * h)
    assert dist.lst_derivative(s) == pytest.approx(fd, rel=1e-6)


def test_weibull_derivative_exponential_reduction():
    d = Weibull(scale=1.0, shape=1.0)
    assert d.lst_derivative(2.0) == pytest.approx(-1.0 / 9.0, abs=1e-9)


def test_pareto_derivative_identity():
    d = Pareto(scale=1.0, shape=2.0)
    g = d.lst(1.0)
    assert d.lst_derivative(1.0) == pytest.approx(g * (1.0 + 2.0) - 2.0, rel=1e-10)


# --- residual transform ------------------------------------------------------


def test_residual_lst_exponential_memoryless():
    d = Exponential(rate=0.8)
    for s in (0.3, 1.0, 4.0):
        assert d.residual_lst(s) == pytest.approx(0.8 / (0.8 + s), rel=1e-12)


def test_residual_lst_limit_at_zero():
    for dist in (Exponential(rate=1.5), Weibull(scale=1.0, shape=2.0), Pareto(scale=1.0, shape=3.0)):
        assert dist.residual_lst(1e-8) == pytest.approx(1.0, abs=1e-6)


def test_pareto_residual_lst_shift_identity():
    # the integrated tail of Par(C, a) is Par(C, a-1)
    assert Pareto(scale=1.0, shape=3.0).residual_lst(1.0) == pytest.approx(
        Pareto(scale=1.0, shape=2.0).lst(1.0), abs=1e-8
    )


# --- sampling ----------------------------------------------------------------


def test_exponential_sampling_lln(rng):
    x = Exponential(rate=1.0).sample(rng, size=10**6)
    assert abs(x.mean() - 1.0) < 4e-3


def test_weibull_shape_one_equals_exponential_stream():
    g1 = np.random.default_rng(7)
    g2 = np.random.default_rng(7)
    w = Weibull(scale=1.0, shape=1.0).sample(g1, size=1000)
    e = Exponential(rate=1.0).sample(g2, size=1000)
    assert np.array_equal(w, e)


def test_pareto_sampling_lln(rng):
    x = Pareto(scale=1.0, shape=2.0).sample(rng, size=10**6)
    assert abs(x.mean() - 1.0) < 0.05


def test_exponential_residual_is_plain_sample():
    g1 = np.random.default_rng(3)
    g2 = np.random.default_rng(3)
    d = Exponential(rate=2.0)
    assert np.array_equal(d.sample_residual(g1, size=100), d.sample(g2, size=100))


def test_residual_mean_identity_all_families(rng):
    # empirical residual mean must hit E[Z^2] / (2 E[Z])
    cases = [
        (Exponential(rate=2.0), (2.0 * 0.25) / (2.0 * 0.5)),  # E Z^2 = 2/rate^2
        (Weibull(scale=1.0, shape=2.0), math.gamma(2.0) / (2.0 * math.gamma(1.5))),
        (Pareto(scale=1.0, shape=3.0), 1.0),  # E Z^2 = 1, E Z = 1/2
    ]
    for dist, target in cases:
        x = dist.sample_residual(rng, size=10**6)
        tol = 0.05 if isinstance(dist, Pareto) else 0.01 * max(1.0, target)
        assert abs(float(np.mean(x)) - target) < tol, dist


def test_weibull_residual_quantiles_against_gammaincinv():
    d = Weibull(scale=1.3, shape=1.7)
    a = 1.0 / d.shape
    u = np.linspace(0.01, 0.99, 25)
    x = _gammainc_inverse(a, u)
    assert np.allclose(x, gammaincinv(a, u), atol=1e-10, rtol=1e-10)
    # through the sampling transform
    t = (x / d.scale) ** (1.0 / d.shape)
    t_ref = (gammaincinv(a, u) / d.scale) ** (1.0 / d.shape)
    assert np.allclose(t, t_ref, atol=1e-9)


def test_inversion_failure_beyond_bracket():
    with pytest.raises(InversionFailure):
        _gammainc_inverse(0.5, np.array([1.0 - 1e-16]))


def test_sampling_size_none_returns_scalar(rng):
    for dist in (Exponential(rate=1.0), Weibull(scale=1.0, shape=2.0), Pareto(scale=1.0, shape=2.0)):
        assert np.isscalar(dist.sample(rng)) or isinstance(dist.sample(rng), float)
        assert isinstance(dist.sample_residual(rng), float)
