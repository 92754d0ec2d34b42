"""Moment statistics, moment-equation solving, and delta-method covariance.

The data side of a moment condition is built from one snapshot series:
the empirical mean and the two lag-product covariance statistics.  The
model side comes from ``model_moments``.  For the symmetric power-law
model the first condition is eliminated in closed form -- given gamma,
the degree scale theta that reproduces the observed mean is
theta = s_hat / sum_k (k/N)^(-1/(gamma-1)) -- leaving a two-dimensional
system in (gamma, zeta) that is solved by damped Newton iteration on
log-transformed variables.  The in/out model keeps all three equations
and solves for (gamma1, gamma2, mu), re-deriving the in-degree scale
from the balance constraint at every iterate.

Asymptotic covariances follow the delta method: with U the Jacobian of
the model-side functions in the parameters and V the Jacobian of the
data-side functions in (s, rho1, rho2), the scaled estimator covariance
is U^-1 V Sigma (U^-1 V)^T, where Sigma is estimated empirically across
runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy import optimize

from .degrees import build_in_out, build_power_law, degree_sum, divisor_factor
from .errors import (
    DegenerateEdge,
    EdgeProbabilityOverflow,
    InvalidParameter,
    SeriesTooShort,
    SingularJacobian,
    TooFewRuns,
)
from .lifetimes import Exponential, Pareto, Weibull
from .moments import model_moments
from .simulate import Equidistant, GraphModelSpec, SamplingScheme, SnapshotSeries

_PENALTY = 1e8
_REL_TOL = 1e-9  # residual norm <= _REL_TOL * (1 + |target|) declares convergence


@dataclass(frozen=True)
class MomentStats:
    """Empirical mean and lag-covariance statistics of one series."""

    s_hat: float
    rho1_hat: float
    rho2_hat: float
    k: int


def compute_stats(series: Union[SnapshotSeries, np.ndarray]) -> MomentStats:
    """Mean, lag-1 and lag-2 covariance statistics of a snapshot series."""
    counts = series.counts if isinstance(series, SnapshotSeries) else series
    counts = np.asarray(counts, dtype=float)
    k = counts.size
    if k < 3:
        raise SeriesTooShort(f"need at least 3 snapshots, got {k}")
    s_hat = float(counts.mean())
    rho1 = float(counts[:-1] @ counts[1:]) / (k - 1) - s_hat**2
    rho2 = float(counts[:-2] @ counts[2:]) / (k - 2) - s_hat**2
    return MomentStats(s_hat=s_hat, rho1_hat=rho1, rho2_hat=rho2, k=k)


def theta_elimination(s_hat: float, gamma: float, n: int) -> float:
    """Degree scale for which the power-law model has total degree s_hat."""
    return s_hat / degree_sum(gamma, n)


# --- model families ----------------------------------------------------------


@dataclass(frozen=True)
class SymmetricFamily:
    """Symmetric degrees; one side homogeneous with free parameter zeta.

    zeta is the exponential rate, the Weibull shape, or the Pareto shape
    (scale fixed at 1 for the latter two).
    """

    homogeneous_side: str  # 'on' | 'off'
    dist_kind: str  # 'exponential' | 'weibull' | 'pareto'
    n: int
    divisor: str = "m"

    @property
    def zeta_name(self) -> str:
        if self.dist_kind == "exponential":
            return "mu" if self.homogeneous_side == "on" else "lambda"
        return "alpha"

    @property
    def param_names(self) -> tuple[str, str, str]:
        return ("theta", "gamma", self.zeta_name)

    def make_dist(self, zeta: float):
        if self.dist_kind == "exponential":
            return Exponential(rate=zeta)
        if self.dist_kind == "weibull":
            return Weibull(scale=1.0, shape=zeta)
        if self.dist_kind == "pareto":
            return Pareto(scale=1.0, shape=zeta)
        raise InvalidParameter(f"unknown dist_kind {self.dist_kind!r}")

    def build_spec(self, theta: float, gamma: float, zeta: float) -> GraphModelSpec:
        return GraphModelSpec(
            degrees=build_power_law(theta, gamma, self.n),
            homogeneous_side=self.homogeneous_side,
            homogeneous_dist=self.make_dist(zeta),
            divisor=self.divisor,
        )

    # zeta transform keeping the solver unconstrained
    def zeta_to_log(self, zeta: float) -> float:
        return math.log(zeta - 1.0) if self.dist_kind == "pareto" else math.log(zeta)

    def zeta_from_log(self, t: float) -> float:
        return 1.0 + math.exp(t) if self.dist_kind == "pareto" else math.exp(t)


@dataclass(frozen=True)
class InOutFamily:
    """Distinct in/out degrees, exp/exp lifetimes, known out-degree scale."""

    theta_plus: float
    n: int
    divisor: str = "m"

    @property
    def param_names(self) -> tuple[str, str, str]:
        return ("gamma1", "gamma2", "mu")

    def build_spec(self, gamma_plus: float, gamma_minus: float, mu: float) -> GraphModelSpec:
        return GraphModelSpec(
            degrees=build_in_out(self.theta_plus, gamma_plus, gamma_minus, self.n),
            homogeneous_side="on",
            homogeneous_dist=Exponential(rate=mu),
            divisor=self.divisor,
        )


ModelFamily = Union[SymmetricFamily, InOutFamily]


# --- moment-condition sides --------------------------------------------------


def x_values(family: ModelFamily, params, scheme: SamplingScheme) -> np.ndarray:
    """Model side (x1, x2, x3) of the moment conditions at ``params``."""
    mv = model_moments(family.build_spec(*params), scheme)
    if isinstance(scheme, Equidistant):
        return np.array([mv.s**2, mv.s**2 * mv.rho1, mv.s**2 * mv.rho2])
    return np.array([mv.s**2, mv.rho1, mv.rho2])


def y_values(stats: MomentStats, scheme: SamplingScheme) -> np.ndarray:
    """Data side (y1, y2, y3) of the moment conditions."""
    if isinstance(scheme, Equidistant):
        return np.array(
            [
                stats.s_hat**2,
                stats.s_hat**2 * stats.rho1_hat,
                stats.s_hat**2 * stats.rho2_hat,
            ]
        )
    return np.array([stats.s_hat**2, stats.rho1_hat, stats.rho2_hat])


def analytic_v_matrix(s: float, rho1: float, rho2: float, scheme_kind: str) -> np.ndarray:
    """Jacobian of the data-side functions in (s, rho1, rho2)."""
    if scheme_kind == "equidistant":
        return np.array(
            [
                [2.0 * s, 0.0, 0.0],
                [2.0 * s * rho1, s**2, 0.0],
                [2.0 * s * rho2, 0.0, s**2],
            ]
        )
    return np.array([[2.0 * s, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])


# --- solving -----------------------------------------------------------------


@dataclass(frozen=True)
class SolveOptions:
    initial_guess: Optional[tuple] = None  # family param triple
    max_iterations: int = 60
    gamma_range: tuple[float, float] = (1.2, 8.0)  # initialization scan
    scan_points: int = 15
    # hard search box; iterates are projected back in.  The upper gamma
    # bound keeps Newton off the flat-degree ridge where gamma loses
    # identifiability.
    gamma_bounds: tuple[float, float] = (1.05, 32.0)
    zeta_bounds: tuple[float, float] = (1e-4, 1e4)


@dataclass(frozen=True)
class SolverInfo:
    iterations: int
    residual_norm: float
    converged: bool


@dataclass(frozen=True)
class EstimationResult:
    param_names: tuple[str, ...]
    params: np.ndarray
    stats: MomentStats
    solver: SolverInfo
    cov: Optional[np.ndarray] = None
    notes: tuple[str, ...] = ()

    def params_dict(self) -> dict:
        return dict(zip(self.param_names, (float(p) for p in self.params)))

    def to_json_dict(self) -> dict:
        out = {}
        if self.param_names[0] == "theta":
            out["theta_hat"] = float(self.params[0])
            out["gamma_hat"] = float(self.params[1])
            out["zeta_hat"] = float(self.params[2])
            out["zeta_name"] = self.param_names[2]
        else:
            out["gamma1_hat"] = float(self.params[0])
            out["gamma2_hat"] = float(self.params[1])
            out["mu_hat"] = float(self.params[2])
        out["converged"] = self.solver.converged
        out["residual"] = self.solver.residual_norm
        out["iterations"] = self.solver.iterations
        out["cov_ij"] = None if self.cov is None else [list(map(float, row)) for row in self.cov]
        out["s_hat"] = self.stats.s_hat
        out["rho1_hat"] = self.stats.rho1_hat
        out["rho2_hat"] = self.stats.rho2_hat
        out["k"] = self.stats.k
        out["notes"] = list(self.notes)
        return out


def _fd_jacobian(fn, z, h=1e-6):
    r0 = fn(z)
    jac = np.empty((r0.size, z.size))
    for j in range(z.size):
        zp = z.copy()
        zp[j] += h
        zm = z.copy()
        zm[j] -= h
        jac[:, j] = (fn(zp) - fn(zm)) / (2.0 * h)
    return jac


def _damped_newton(fn, z0, max_iterations, box):
    """Damped Newton on the scaled residuals, projected into ``box``."""
    z_lo, z_hi = box
    z = np.clip(np.asarray(z0, dtype=float), z_lo, z_hi)
    r = fn(z)
    best_z, best_norm = z.copy(), float(np.linalg.norm(r))
    iterations = 0
    for _ in range(max_iterations):
        iterations += 1
        jac = _fd_jacobian(fn, z)
        if not np.all(np.isfinite(jac)):
            break
        try:
            step = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(step)):
            break
        current = float(np.linalg.norm(r))
        t = 1.0
        improved = False
        while t > 1e-4:
            z_new = np.clip(z + t * step, z_lo, z_hi)
            r_new = fn(z_new)
            new_norm = float(np.linalg.norm(r_new))
            if new_norm < current * (1.0 - 1e-4 * t):
                z = z_new
                r = r_new
                improved = True
                break
            t *= 0.5
        if not improved:
            break
        if float(np.linalg.norm(r)) < best_norm:
            best_norm = float(np.linalg.norm(r))
            best_z = z.copy()
        if best_norm < 1e-13:
            break
    return best_z, best_norm, iterations


def _nelder_mead_polish(fn, z0, box):
    z_lo, z_hi = box
    res = optimize.minimize(
        lambda z: float(np.sum(fn(np.clip(z, z_lo, z_hi)) ** 2)),
        z0,
        method="Nelder-Mead",
        options={"maxiter": 800, "xatol": 1e-12, "fatol": 1e-24},
    )
    return np.clip(res.x, z_lo, z_hi)


def _solve_from_starts(residual, starts, box, max_iterations, unscaled_of, tol):
    """Newton from each candidate start until one converges; the best
    iterate gets a simplex polish if none does."""
    best_z = None
    best_unscaled = np.inf
    iterations = 0
    for z0 in starts:
        z, _, used = _damped_newton(residual, z0, max_iterations, box)
        iterations += used
        unscaled = unscaled_of(z)
        if unscaled < best_unscaled:
            best_unscaled, best_z = unscaled, z
        if unscaled <= tol:
            return z, iterations
    z_nm = _nelder_mead_polish(residual, best_z, box)
    z2, _, extra = _damped_newton(residual, z_nm, max_iterations, box)
    iterations += extra
    if unscaled_of(z2) < best_unscaled:
        best_z = z2
    return best_z, iterations


def _scan_bracket_root(fn, grid):
    """Root of scalar fn over a grid: brentq on the first sign flip,
    argmin of |fn| otherwise."""
    values = np.array([fn(t) for t in grid])
    finite = np.isfinite(values)
    for a, b, fa, fb, ok_a, ok_b in zip(
        grid[:-1], grid[1:], values[:-1], values[1:], finite[:-1], finite[1:]
    ):
        if ok_a and ok_b and fa * fb < 0:
            return optimize.brentq(fn, a, b, xtol=1e-6, maxiter=100)
    masked = np.where(finite, np.abs(values), np.inf)
    return float(grid[int(np.argmin(masked))])


def solve_moments(
    stats: MomentStats,
    family: ModelFamily,
    scheme: SamplingScheme,
    options: Optional[SolveOptions] = None,
) -> EstimationResult:
    """Solve the moment conditions for the family's free parameters.

    For symmetric families the system is reduced to (gamma, zeta) via the
    closed-form theta elimination; the in/out family solves all three
    equations in (gamma1, gamma2, mu).  Newton failures fall back to a
    derivative-free simplex search followed by a Newton polish.
    """
    options = options or SolveOptions()
    notes = []
    if stats.rho1_hat <= 0:
        notes.append("rho1_hat <= 0: lag-1 target carries no usable signal")
    if stats.rho2_hat <= 0:
        notes.append("rho2_hat <= 0: small-sample noise in the lag-2 statistic")

    y = y_values(stats, scheme)
    scale = 1.0 + np.abs(y)

    if isinstance(family, SymmetricFamily):
        result = _solve_symmetric(stats, family, scheme, y, scale, options)
    else:
        result = _solve_inout(stats, family, scheme, y, scale, options)
    params, residual_norm, iterations, converged = result
    return EstimationResult(
        param_names=family.param_names,
        params=params,
        stats=stats,
        solver=SolverInfo(
            iterations=iterations, residual_norm=residual_norm, converged=converged
        ),
        notes=tuple(notes),
    )


def _unscaled_norm(scaled_residual, scale_used):
    return float(np.linalg.norm(scaled_residual * scale_used))


def _solve_symmetric(stats, family, scheme, y, scale, options):
    f = divisor_factor(family.divisor)

    def residual(z):
        try:
            gamma = 1.0 + math.exp(z[0])
            zeta = family.zeta_from_log(z[1])
            theta = theta_elimination(f * stats.s_hat, gamma, family.n)
            x = x_values(family, (theta, gamma, zeta), scheme)
        except (EdgeProbabilityOverflow, DegenerateEdge, InvalidParameter,
                OverflowError, ZeroDivisionError):
            return np.array([_PENALTY, _PENALTY])
        r = (x[1:] - y[1:]) / scale[1:]
        return np.where(np.isfinite(r), r, _PENALTY)

    # in z-space the zeta bounds read on the rate, the Weibull shape, or
    # the Pareto shape excess alpha - 1, whichever the family transforms
    box = (
        np.array(
            [math.log(options.gamma_bounds[0] - 1.0), math.log(options.zeta_bounds[0])]
        ),
        np.array(
            [math.log(options.gamma_bounds[1] - 1.0), math.log(options.zeta_bounds[1])]
        ),
    )
    if options.initial_guess is not None:
        _, gamma0, zeta0 = options.initial_guess
        starts = [np.array([math.log(gamma0 - 1.0), family.zeta_to_log(zeta0)])]
    else:
        starts = _scan_symmetric(residual, family, options)

    tol = _REL_TOL * (1.0 + float(np.linalg.norm(y[1:])))
    z, iterations = _solve_from_starts(
        residual, starts, box, options.max_iterations, lambda zz: _unscaled_norm(residual(zz), scale[1:]), tol
    )
    unscaled = _unscaled_norm(residual(z), scale[1:])
    z = np.clip(z, -700.0, 700.0)
    gamma = 1.0 + math.exp(z[0])
    zeta = family.zeta_from_log(z[1])
    theta = theta_elimination(f * stats.s_hat, gamma, family.n)
    params = np.array([theta, gamma, zeta])
    return params, unscaled, iterations, unscaled <= tol


_PENALTY_SCORE = 1e6


def _scan_candidates(point_fn, ts, top=5):
    """Rank profiled scan points; refine across feasibility cliffs.

    The theta elimination pushes the largest edge probability toward one
    as gamma shrinks, so the residual surface has a hard infeasibility
    wall whose neighborhood the coarse grid undersamples; extra points
    are inserted wherever the scan crosses it.
    """
    scored = [point_fn(t) for t in ts]
    extra = []
    for (s0, _), (s1, _), t0, t1 in zip(scored, scored[1:], ts, ts[1:]):
        if (s0 >= _PENALTY_SCORE) != (s1 >= _PENALTY_SCORE):
            extra.extend(point_fn(t) for t in np.linspace(t0, t1, 8)[1:-1])
    scored = sorted(scored + extra, key=lambda item: item[0])
    feasible = [z for score, z in scored[:top] if score < _PENALTY_SCORE]
    return feasible or [scored[0][1]]


def _scan_symmetric(residual, family, options):
    """Candidate starts: coarse gamma scan with zeta profiled from the
    lag-1 equation, ranked by the lag-2 residual."""
    lo, hi = options.gamma_range
    gamma_ts = np.linspace(math.log(lo - 1.0), math.log(hi - 1.0), options.scan_points)
    zeta_ts = np.linspace(math.log(1e-3), math.log(1e3), 9)

    def point_fn(gt):
        zt = _scan_bracket_root(lambda t: residual(np.array([gt, t]))[0], zeta_ts)
        return abs(residual(np.array([gt, zt]))[1]), np.array([gt, zt])

    return _scan_candidates(point_fn, gamma_ts)


def _solve_inout(stats, family, scheme, y, scale, options):
    f = divisor_factor(family.divisor)

    def residual(z):
        try:
            gamma1 = 1.0 + math.exp(z[0])
            gamma2 = 1.0 + math.exp(z[1])
            mu = math.exp(z[2])
            x = x_values(family, (gamma1, gamma2, mu), scheme)
        except (EdgeProbabilityOverflow, DegenerateEdge, InvalidParameter,
                OverflowError, ZeroDivisionError):
            return np.full(3, _PENALTY)
        r = (x - y) / scale
        return np.where(np.isfinite(r), r, _PENALTY)

    g_lo = math.log(options.gamma_bounds[0] - 1.0)
    g_hi = math.log(options.gamma_bounds[1] - 1.0)
    box = (
        np.array([g_lo, g_lo, math.log(options.zeta_bounds[0])]),
        np.array([g_hi, g_hi, math.log(options.zeta_bounds[1])]),
    )
    if options.initial_guess is not None:
        g1, g2, mu0 = options.initial_guess
        starts = [np.array([math.log(g1 - 1.0), math.log(g2 - 1.0), math.log(mu0)])]
    else:
        starts = _scan_inout(residual, stats, family, f, options)

    tol = _REL_TOL * (1.0 + float(np.linalg.norm(y)))
    z, iterations = _solve_from_starts(
        residual, starts, box, options.max_iterations, lambda zz: _unscaled_norm(residual(zz), scale), tol
    )
    unscaled = _unscaled_norm(residual(z), scale)
    z = np.clip(z, -700.0, 700.0)
    params = np.array(
        [1.0 + math.exp(z[0]), 1.0 + math.exp(z[1]), math.exp(z[2])]
    )
    return params, unscaled, iterations, unscaled <= tol


def _scan_inout(residual, stats, family, f, options):
    # gamma1 is pinned by the mean equation alone: m(gamma1) = f * s_hat
    target = f * stats.s_hat / family.theta_plus

    def mean_gap(t):
        return degree_sum(1.0 + math.exp(t), family.n) - target

    t_grid = np.linspace(math.log(1e-2), math.log(64.0), 40)
    g1_t = _scan_bracket_root(mean_gap, t_grid)

    gamma_lo, gamma_hi = options.gamma_range
    g2_ts = np.linspace(
        math.log(gamma_lo - 1.0), math.log(gamma_hi - 1.0), options.scan_points
    )
    mu_ts = np.linspace(math.log(1e-3), math.log(1e3), 9)

    def point_fn(g2t):
        mut = _scan_bracket_root(
            lambda t: residual(np.array([g1_t, g2t, t]))[1], mu_ts
        )
        return abs(residual(np.array([g1_t, g2t, mut]))[2]), np.array([g1_t, g2t, mut])

    return _scan_candidates(point_fn, g2_ts)


# --- delta method ------------------------------------------------------------


def delta_method_cov(
    params, family: ModelFamily, scheme: SamplingScheme, sigma: np.ndarray
) -> np.ndarray:
    """Estimator covariance U^-1 V Sigma (U^-1 V)^T of the delta method.

    U is the central-difference Jacobian of the model-side functions in
    the three family parameters (steps 1e-5 * (1 + |p|)); V is the
    analytic Jacobian of the data-side functions.
    """
    params = np.asarray(params, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    u = np.empty((3, 3))
    for j in range(3):
        h = 1e-5 * (1.0 + abs(params[j]))
        pp = params.copy()
        pp[j] += h
        pm = params.copy()
        pm[j] -= h
        u[:, j] = (x_values(family, pp, scheme) - x_values(family, pm, scheme)) / (
            2.0 * h
        )
    if not np.all(np.isfinite(u)) or np.linalg.cond(u) > 1e12:
        raise SingularJacobian(
            f"model-side Jacobian condition number {np.linalg.cond(u):.3g}"
        )
    mv = model_moments(family.build_spec(*params), scheme)
    v = analytic_v_matrix(mv.s, mv.rho1, mv.rho2, mv.scheme)
    uv = np.linalg.solve(u, v)
    return uv @ sigma @ uv.T


def empirical_sigma(stats_list, k: int) -> np.ndarray:
    """K times the across-run sample covariance of (s_hat, rho1, rho2)."""
    if len(stats_list) < 2:
        raise TooFewRuns(f"need >= 2 runs, got {len(stats_list)}")
    x = np.array([[st.s_hat, st.rho1_hat, st.rho2_hat] for st in stats_list])
    return k * np.cov(x, rowvar=False, ddof=1)
