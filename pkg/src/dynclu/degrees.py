"""Parametric target-degree sequences and stationary edge probabilities.

Vertex i out of N carries the target degree theta * (i/N)^(-1/(gamma-1)),
which gives the empirical degree distribution a power-law tail with
exponent gamma.  Edges are directed and self-loops are allowed, so all
N^2 ordered vertex pairs participate; pair (i, j) is on in stationarity
with probability d_i * d_j / m, where m is the summed degree.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EdgeProbabilityOverflow, IndexOutOfRange, InvalidParameter

# probabilities in (1, 1 + slack] are treated as rounding noise and clamped
CLAMP_SLACK = 1e-12

_DIVISOR_FACTORS = {"m": 1.0, "2m": 2.0}


def divisor_factor(divisor: str) -> float:
    """Map the divisor convention ('m' or '2m') to its scale factor."""
    try:
        return _DIVISOR_FACTORS[divisor]
    except KeyError:
        raise InvalidParameter(f"unknown divisor convention {divisor!r}") from None


def power_law_degrees(theta: float, gamma: float, n: int) -> np.ndarray:
    """Degree vector d_i = theta * (i/N)^(-1/(gamma-1)), i = 1..N."""
    ranks = np.arange(1, n + 1, dtype=float) / n
    return theta * ranks ** (-1.0 / (gamma - 1.0))


def degree_sum(gamma: float, n: int) -> float:
    """Sum over i of (i/N)^(-1/(gamma-1)), the theta=1 total degree."""
    return float(np.sum(power_law_degrees(1.0, gamma, n)))


@dataclass(frozen=True)
class DegreeModel:
    """Symmetric power-law degree model (in-degree equals out-degree)."""

    n: int
    theta: float
    gamma: float
    degrees: np.ndarray
    m: float

    @property
    def degrees_out(self) -> np.ndarray:
        return self.degrees

    @property
    def degrees_in(self) -> np.ndarray:
        return self.degrees


@dataclass(frozen=True)
class InOutDegreeModel:
    """Distinct target in/out-degrees; theta_minus balances the totals."""

    n: int
    theta_plus: float
    gamma_plus: float
    theta_minus: float
    gamma_minus: float
    degrees_out: np.ndarray
    degrees_in: np.ndarray
    m: float


def _check_positive(name, value):
    if not np.isfinite(value) or value <= 0:
        raise InvalidParameter(f"{name} must be positive and finite, got {value}")


def _check_gamma(name, value):
    if not np.isfinite(value) or value <= 1:
        raise InvalidParameter(f"{name} must exceed 1, got {value}")


def _check_overflow(d_out: np.ndarray, d_in: np.ndarray, m: float) -> None:
    # the maximum of d_i d_j / m is attained at the largest degrees
    i = int(np.argmax(d_out))
    j = int(np.argmax(d_in))
    worst = d_out[i] * d_in[j] / m
    if worst > 1.0 + CLAMP_SLACK:
        raise EdgeProbabilityOverflow(i + 1, j + 1, worst)


def build_power_law(theta: float, gamma: float, n: int) -> DegreeModel:
    """Construct the symmetric model, validating that all e_ij <= 1."""
    _check_positive("theta", theta)
    _check_gamma("gamma", gamma)
    if n < 1:
        raise InvalidParameter(f"n must be >= 1, got {n}")
    degrees = power_law_degrees(theta, gamma, n)
    m = float(np.sum(degrees))
    _check_overflow(degrees, degrees, m)
    degrees.setflags(write=False)
    return DegreeModel(n=n, theta=theta, gamma=gamma, degrees=degrees, m=m)


def build_in_out(
    theta_plus: float, gamma_plus: float, gamma_minus: float, n: int
) -> InOutDegreeModel:
    """Construct the in/out model; theta_minus solves the balance constraint.

    The in-degree scale is fixed in closed form by requiring that both
    degree sequences sum to the same total m.
    """
    _check_positive("theta_plus", theta_plus)
    _check_gamma("gamma_plus", gamma_plus)
    _check_gamma("gamma_minus", gamma_minus)
    if n < 1:
        raise InvalidParameter(f"n must be >= 1, got {n}")
    d_out = power_law_degrees(theta_plus, gamma_plus, n)
    m = float(np.sum(d_out))
    theta_minus = m / degree_sum(gamma_minus, n)
    d_in = power_law_degrees(theta_minus, gamma_minus, n)
    _check_overflow(d_out, d_in, m)
    d_out.setflags(write=False)
    d_in.setflags(write=False)
    return InOutDegreeModel(
        n=n,
        theta_plus=theta_plus,
        gamma_plus=gamma_plus,
        theta_minus=theta_minus,
        gamma_minus=gamma_minus,
        degrees_out=d_out,
        degrees_in=d_in,
        m=m,
    )


def edge_on_probability(model, i: int, j: int) -> float:
    """Stationary probability that the directed edge (i, j) is present.

    Indices are 1-based, matching the vertex labels 1..N.
    """
    n = model.n
    if not (1 <= i <= n) or not (1 <= j <= n):
        raise IndexOutOfRange(f"vertex pair ({i}, {j}) outside 1..{n}")
    e = model.degrees_out[i - 1] * model.degrees_in[j - 1] / model.m
    return min(e, 1.0) if e <= 1.0 + CLAMP_SLACK else e


def edge_probability_matrix(model, divisor: str = "m") -> np.ndarray:
    """All N^2 stationary on-probabilities as an (N, N) array.

    ``divisor`` selects the normalization of the stationarity constraint:
    'm' (the default, total degree) or '2m'.
    """
    f = divisor_factor(divisor)
    e = np.outer(model.degrees_out, model.degrees_in) / (f * model.m)
    # clamp floating-point slack just above 1; larger excesses were
    # rejected at construction time for divisor 'm'
    np.minimum(e, 1.0, out=e, where=e <= 1.0 + CLAMP_SLACK)
    return e
