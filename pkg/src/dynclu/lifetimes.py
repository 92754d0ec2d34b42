"""Lifetime laws for edge on- and off-times.

Three families are supported, each pinned down by its tail:

* exponential, P(Z > t) = exp(-rate * t);
* Weibull,     P(Z > t) = exp(-scale * t^shape);
* Pareto,      P(Z > t) = (scale / (scale + t))^shape  with shape > 1.

Every family provides the mean, the Laplace-Stieltjes transform (LST)
E exp(-s Z) and its s-derivative, inverse-CDF sampling, and sampling
from the residual-lifetime density (1 - F(t)) / mean, which is what a
sojourn in progress at a stationary inspection time looks like.

The exponential transform is rate/(rate+s); the Weibull transform is
obtained by adaptive quadrature (with the t^(shape-1) endpoint
singularity substituted away when shape < 1); the Pareto transform is
the quadrature of its defining integral rewritten in an overflow-free
form, with the closed derivative identity
d/ds G(s) = (C + shape/s) G(s) - shape/s.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import integrate
from scipy.special import gammainc

from .errors import InfiniteMean, InvalidParameter, InversionFailure, QuadratureFailure

# absolute tolerance demanded of every transform quadrature
QUAD_TOL = 1e-10
# truncation point T satisfies exp(-T) < 1e-16 of the integrand envelope
_TAIL_EXPONENT = 37.0


def _quad(fn, lo, hi, what: str) -> float:
    value, err = integrate.quad(
        fn, lo, hi, epsabs=QUAD_TOL * 1e-2, epsrel=1e-11, limit=300
    )
    if err > QUAD_TOL:
        raise QuadratureFailure(f"quadrature of {what} missed tolerance", err)
    return value


def _uniform_open(rng: np.random.Generator, size):
    # 1 - U in (0, 1]: keeps log() finite for inverse-CDF transforms
    if size is None:
        return 1.0 - rng.random()
    return 1.0 - rng.random(size)


def _check_s_nonneg(s: float):
    if s < 0:
        raise InvalidParameter(f"transform argument must be >= 0, got {s}")


def _check_s_pos(s: float):
    if s <= 0:
        raise InvalidParameter(f"transform argument must be > 0, got {s}")


class _LifetimeBase:
    def residual_lst(self, s: float) -> float:
        """Transform of the residual lifetime, (1 - lst(s)) / (s * mean)."""
        _check_s_pos(s)
        return (1.0 - self.lst(s)) / (s * self.mean())


@dataclass(frozen=True)
class Exponential(_LifetimeBase):
    rate: float

    def __post_init__(self):
        if not np.isfinite(self.rate) or self.rate <= 0:
            raise InvalidParameter(f"rate must be positive, got {self.rate}")

    def mean(self) -> float:
        return 1.0 / self.rate

    def lst(self, s: float) -> float:
        _check_s_nonneg(s)
        return self.rate / (self.rate + s)

    def lst_derivative(self, s: float) -> float:
        _check_s_pos(s)
        return -self.rate / (self.rate + s) ** 2

    def sample(self, rng: np.random.Generator, size=None):
        return -np.log(_uniform_open(rng, size)) / self.rate

    def sample_residual(self, rng: np.random.Generator, size=None):
        # memoryless: the residual law is the law itself
        return self.sample(rng, size)


@dataclass(frozen=True)
class Weibull(_LifetimeBase):
    scale: float  # lambda in the tail exp(-lambda t^alpha)
    shape: float  # alpha

    def __post_init__(self):
        if not np.isfinite(self.scale) or self.scale <= 0:
            raise InvalidParameter(f"scale must be positive, got {self.scale}")
        if not np.isfinite(self.shape) or self.shape <= 0:
            raise InvalidParameter(f"shape must be positive, got {self.shape}")

    def mean(self) -> float:
        return self.scale ** (-1.0 / self.shape) * math.gamma(1.0 + 1.0 / self.shape)

    def _transform_moment(self, s: float, power: int) -> float:
        """Quadrature of integral t^power e^{-st} f(t) dt.

        For shape >= 1 the density is integrated directly on [0, T].
        For shape < 1 the substitution u = t^shape removes the endpoint
        singularity, turning the integral into
        integral u^(power/shape) lam e^{-lam u} e^{-s u^(1/shape)} du.
        """
        lam, alpha = self.scale, self.shape
        if alpha >= 1.0:
            t_max = (_TAIL_EXPONENT / lam) ** (1.0 / alpha)

            def fn(t):
                return (
                    t**power
                    * math.exp(-s * t)
                    * lam
                    * alpha
                    * t ** (alpha - 1.0)
                    * math.exp(-lam * t**alpha)
                )

        else:
            t_max = _TAIL_EXPONENT / lam

            def fn(u):
                t = u ** (1.0 / alpha)
                return t**power * math.exp(-s * t) * lam * math.exp(-lam * u)

        return _quad(fn, 0.0, t_max, f"Weibull transform (power {power})")

    def lst(self, s: float) -> float:
        _check_s_nonneg(s)
        if s == 0.0:
            return 1.0
        return self._transform_moment(s, 0)

    def lst_derivative(self, s: float) -> float:
        _check_s_pos(s)
        return -self._transform_moment(s, 1)

    def sample(self, rng: np.random.Generator, size=None):
        u = _uniform_open(rng, size)
        return (-np.log(u) / self.scale) ** (1.0 / self.shape)

    def sample_residual(self, rng: np.random.Generator, size=None):
        """Draw from the integrated-tail law by inverting its CDF.

        The residual CDF is H(t) = P(1/shape, scale * t^shape) with P the
        regularized lower incomplete gamma function; H is inverted by
        bracketing and bisection to well below 1e-10 in t.
        """
        u = _uniform_open(rng, size)
        x = _gammainc_inverse(1.0 / self.shape, np.asarray(u, dtype=float))
        t = (x / self.scale) ** (1.0 / self.shape)
        return float(t[0]) if size is None else t


@dataclass(frozen=True)
class Pareto(_LifetimeBase):
    scale: float  # C
    shape: float  # alpha, > 1 so the mean is finite

    def __post_init__(self):
        if not np.isfinite(self.scale) or self.scale <= 0:
            raise InvalidParameter(f"scale must be positive, got {self.scale}")
        if not np.isfinite(self.shape):
            raise InvalidParameter(f"shape must be finite, got {self.shape}")
        if self.shape <= 1:
            raise InfiniteMean(
                f"Pareto shape must exceed 1 for a finite mean, got {self.shape}"
            )

    def mean(self) -> float:
        return self.scale / (self.shape - 1.0)

    def lst(self, s: float) -> float:
        """E e^{-sZ} by quadrature of the defining integral.

        Substituting t = scale * w folds the e^{s*scale} factor of the
        incomplete-gamma closed form into the integrand, so nothing
        overflows:  lst(s) = shape * integral e^{-s*scale*w} (1+w)^-(shape+1) dw.
        """
        _check_s_nonneg(s)
        if s == 0.0:
            return 1.0
        a, sc = self.shape, s * self.scale

        def fn(w):
            return math.exp(-sc * w) * (1.0 + w) ** (-(a + 1.0))

        return a * _quad(fn, 0.0, np.inf, "Pareto transform")

    def lst_derivative(self, s: float) -> float:
        _check_s_pos(s)
        g = self.lst(s)
        return (self.scale + self.shape / s) * g - self.shape / s

    def sample(self, rng: np.random.Generator, size=None):
        u = _uniform_open(rng, size)
        return self.scale * (u ** (-1.0 / self.shape) - 1.0)

    def sample_residual(self, rng: np.random.Generator, size=None):
        # the integrated tail of Pareto(C, a) is Pareto(C, a - 1)
        u = _uniform_open(rng, size)
        return self.scale * (u ** (-1.0 / (self.shape - 1.0)) - 1.0)


LifetimeDist = Union[Exponential, Weibull, Pareto]


def _gammainc_inverse(a: float, u: np.ndarray) -> np.ndarray:
    """Solve P(a, x) = u for x, vectorized, by bracket doubling + bisection."""
    u = np.atleast_1d(u)
    if np.any(u > 1.0 - 1e-14):
        # beyond the t_max at which 1 - H(t_max) < 1e-14: no usable bracket
        raise InversionFailure("quantile beyond 1 - 1e-14, bracket not found")
    hi = np.full(u.shape, a + 1.0)
    for _ in range(200):
        short = gammainc(a, hi) < u
        if not short.any():
            break
        hi[short] *= 2.0
    else:  # pragma: no cover - unreachable for u <= 1 - 1e-14
        raise InversionFailure("bracket doubling exhausted")
    lo = np.zeros_like(hi)
    for _ in range(90):
        mid = 0.5 * (lo + hi)
        below = gammainc(a, mid) < u
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)
