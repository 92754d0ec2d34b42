"""Analytic moments of the snapshot process.

The stationary mean of the total edge count equals the summed degree m.
Lag covariances come in two flavors.  Under equidistant sampling with
exponential on/off times, the per-edge covariance over a lag t is
e (1 - e) exp(-(lam + mu) t) and sums in closed form.  Under Poisson
sampling the covariance over one inter-inspection gap T_xi is available
for arbitrary lifetime laws through their Laplace-Stieltjes transforms:

    p[xi, ++] = (1 - F(xi)) / (1 - F(xi) G(xi)),
    p[xi, --] = (1 - G(xi)) / (1 - F(xi) G(xi)),
    p_res[xi, ++] = 1 - p[xi, --] * F_res(xi),
    rho(T_xi) = e * (p_res[xi, ++] - e),

with F, G the on/off transforms and F_res the residual on-time
transform.  The covariance over two gaps (an Erlang-2 horizon) follows
from the xi-derivative identity rho(E_xi2) = rho(T_xi) - xi * rho'(T_xi),
evaluated here by chain rule through the transform derivatives.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .degrees import edge_probability_matrix, power_law_degrees
from .errors import NegativeCovariance, WrongFamily
from .lifetimes import LifetimeDist
from .simulate import (
    EdgeSide,
    Equidistant,
    GraphModelSpec,
    PoissonTimes,
    SamplingScheme,
    resolve_binding,
)

_NEG_NOISE = 1e-12
_NEG_ERROR = 1e-9


@dataclass(frozen=True)
class MomentVector:
    """Stationary mean and the two lag-covariance statistics of a scheme."""

    s: float
    rho1: float
    rho2: float
    scheme: str  # 'equidistant' | 'poisson'


def rho_delta_exp(model, mu: float, delta: float, divisor: str = "m") -> float:
    """Summed lag-delta covariance for exponential on/off with on-rate mu.

    Under the stationarity binding the per-edge rate sum is mu / (1 - e),
    so the total is  sum_ij e (1 - e) exp(-mu delta / (1 - e)).
    """
    e = edge_probability_matrix(model, divisor)
    return float(np.sum(e * (1.0 - e) * np.exp(-mu * delta / (1.0 - e))))


def moment_functions_AB(
    theta: float, gamma: float, mu: float, delta: float, n: int
) -> tuple[float, float, float]:
    """Left-hand sides of the equidistant moment conditions.

    A equals the squared total degree; B(delta) equals s^2 times the
    summed lag-delta covariance.  Both are evaluated by direct double
    summation over the N^2 kernel values H_ij = (ij/N^2)^(-1/(gamma-1)).
    """
    d = power_law_degrees(theta, gamma, n)
    dd = np.outer(d, d)  # = theta^2 * H_ij
    s = float(np.sum(d))
    a = float(np.sum(dd))
    b1 = float(np.sum(dd * (s - dd) * np.exp(-mu * s * delta / (s - dd))))
    b2 = float(np.sum(dd * (s - dd) * np.exp(-mu * s * 2.0 * delta / (s - dd))))
    return a, b1, b2


def p_fresh(on_lst_value, off_lst_value):
    """On-at-horizon probabilities from fresh on / fresh off starts."""
    denom = 1.0 - on_lst_value * off_lst_value
    p_plus_plus = (1.0 - on_lst_value) / denom
    p_minus_minus = (1.0 - off_lst_value) / denom
    return p_plus_plus, p_minus_minus


def p_res_plus_plus(on_dist: LifetimeDist, off_dist: LifetimeDist, xi: float) -> float:
    """P(on at the exponential horizon | on at 0, residual sojourn)."""
    f = on_dist.lst(xi)
    g = off_dist.lst(xi)
    _, p_mm = p_fresh(f, g)
    return 1.0 - p_mm * on_dist.residual_lst(xi)


def _clip_covariance(value):
    """Per-edge op policy: zero out noise, treat anything worse as a bug."""
    bad = np.any(np.asarray(value) < -_NEG_ERROR)
    if bad:
        raise NegativeCovariance(
            f"covariance {np.min(value)!r} below -{_NEG_ERROR}; transform bug likely"
        )
    return np.maximum(value, 0.0)


def _zero_noise(value):
    # keep genuinely negative values (near-periodic lifetimes produce them
    # at extreme shapes); only cancellation noise is zeroed
    return np.where((value < 0.0) & (value > -_NEG_NOISE), 0.0, value)


def rho_T_xi(e: float, on_dist: LifetimeDist, off_dist: LifetimeDist, xi: float) -> float:
    """Per-edge covariance of the indicators one exponential gap apart."""
    value = e * (p_res_plus_plus(on_dist, off_dist, xi) - e)
    return float(_clip_covariance(value))


def _p_res_and_derivative(f, df, g, dg, f_mean, xi):
    """p_res[xi,++] and its xi-derivative from transform values.

    Vectorized over edges; uses the product/chain rule through
    p_res = 1 - p_mm * F_res with F_res = (1 - F) / (xi * f_mean).
    """
    denom = 1.0 - f * g
    p_mm = (1.0 - g) / denom
    f_res = (1.0 - f) / (xi * f_mean)
    p_res = 1.0 - p_mm * f_res
    dp_mm = (-dg * denom + (1.0 - g) * (df * g + f * dg)) / denom**2
    df_res = -df / (xi * f_mean) - (1.0 - f) / (xi**2 * f_mean)
    dp_res = -(dp_mm * f_res + p_mm * df_res)
    return p_res, dp_res


def rho_erlang2(e: float, on_dist: LifetimeDist, off_dist: LifetimeDist, xi: float) -> float:
    """Per-edge covariance of the indicators two Poisson gaps apart.

    Evaluates rho(E_xi2) = rho(T_xi) - xi * d rho(T_xi)/d xi with the
    derivative taken analytically through the transform derivatives.
    """
    f = on_dist.lst(xi)
    df = on_dist.lst_derivative(xi)
    g = off_dist.lst(xi)
    dg = off_dist.lst_derivative(xi)
    p_res, dp_res = _p_res_and_derivative(f, df, g, dg, on_dist.mean(), xi)
    value = e * (p_res - e) - xi * e * dp_res
    return float(_clip_covariance(value))


def _side_transforms(side: EdgeSide, xi: float, n_edges: int):
    """(F, F', mean) per edge for one side, vectorized where possible."""
    if side.kind == "exponential":
        rate = side.p0
        return rate / (rate + xi), -rate / (rate + xi) ** 2, 1.0 / rate
    if side.homogeneous:
        dist = side.hom_dist()
        return (
            np.full(n_edges, dist.lst(xi)),
            np.full(n_edges, dist.lst_derivative(xi)),
            np.full(n_edges, dist.mean()),
        )
    # heterogeneous non-exponential sides are not produced by any binding,
    # but stay correct if one ever is
    f = np.empty(n_edges)
    df = np.empty(n_edges)
    mean = np.empty(n_edges)
    for i in range(n_edges):
        dist = side.dist(i)
        f[i] = dist.lst(xi)
        df[i] = dist.lst_derivative(xi)
        mean[i] = dist.mean()
    return f, df, mean


def poisson_edge_covariances(spec: GraphModelSpec, xi: float):
    """Vectors of rho_ij(T_xi) and rho_ij(E_xi2) over all N^2 edges.

    Unlike the per-edge operations this path does not reject negative
    values: the moment solver probes parameter regions (very peaked
    lifetime shapes) where the analytic covariance really is negative.
    """
    resolved = resolve_binding(spec)
    n_edges = resolved.e.size
    f, df, f_mean = _side_transforms(resolved.on, xi, n_edges)
    g, dg, _ = _side_transforms(resolved.off, xi, n_edges)
    p_res, dp_res = _p_res_and_derivative(f, df, g, dg, f_mean, xi)
    rho_t = _zero_noise(resolved.e * (p_res - resolved.e))
    rho_e2 = _zero_noise(rho_t - xi * resolved.e * dp_res)
    return rho_t, rho_e2


def model_moments(spec: GraphModelSpec, scheme: SamplingScheme) -> MomentVector:
    """Analytic (s, rho1, rho2) for a model under a sampling scheme."""
    e = spec.edge_probabilities()
    s = float(np.sum(e))
    if isinstance(scheme, Equidistant):
        if not spec.is_exponential():
            raise WrongFamily(
                "deterministic-lag covariances exist in closed form only for "
                "exponential on/off times"
            )
        resolved = resolve_binding(spec)
        rate_sum = resolved.on.p0 + resolved.off.p0
        var_term = resolved.e * (1.0 - resolved.e)
        rho1 = float(np.sum(var_term * np.exp(-rate_sum * scheme.delta)))
        rho2 = float(np.sum(var_term * np.exp(-rate_sum * 2.0 * scheme.delta)))
        return MomentVector(s=s, rho1=rho1, rho2=rho2, scheme="equidistant")
    rho_t, rho_e2 = poisson_edge_covariances(spec, scheme.xi)
    return MomentVector(
        s=s, rho1=float(np.sum(rho_t)), rho2=float(np.sum(rho_e2)), scheme="poisson"
    )
