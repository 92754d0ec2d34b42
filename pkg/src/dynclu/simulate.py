"""Stationary simulation of the dynamic graph and snapshot recording.

Every ordered vertex pair evolves as an independent alternating renewal
process.  One side (on or off) follows a single user-chosen lifetime law
for all edges; the other side is exponential with a per-edge rate derived
from the stationarity constraint mean_on / (mean_on + mean_off) = e_ij.

Two engines produce the snapshot counts:

* ``skip``  -- valid when both sides are exponential: the edge state is
  advanced directly from one sampling time to the next using the two-state
  Markov transition law, O(K) work per edge;
* ``event`` -- the general engine: each edge's renewal timeline is rolled
  forward past every sampling time, drawing fresh sojourns as needed.

Each engine exists in a compiled (Cython) and a pure-numpy variant; the
compiled one is preferred at import time when available.  Runs are
deterministic given (spec, scheme, seed, engine, backend): the seed expands
into one sampling-time stream plus one stream per edge.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from . import _engine
from .degrees import DegreeModel, InOutDegreeModel, edge_probability_matrix
from .errors import DegenerateEdge, InvalidParameter, WrongFamily
from .lifetimes import Exponential, LifetimeDist, Pareto, Weibull

DIST_CODES = {Exponential: 0, Weibull: 1, Pareto: 2}

BINARY_MAGIC = b"DCLS1"

# edges per chunk when materializing per-step decay matrices
_CHUNK_EDGES = 64


@dataclass(frozen=True)
class Equidistant:
    """Observe S(t) at t = delta, 2*delta, ..., k*delta."""

    delta: float
    k: int

    def __post_init__(self):
        if not np.isfinite(self.delta) or self.delta <= 0:
            raise InvalidParameter(f"delta must be positive, got {self.delta}")
        if self.k < 1:
            raise InvalidParameter(f"k must be >= 1, got {self.k}")


@dataclass(frozen=True)
class PoissonTimes:
    """Observe S(t) at the epochs of a rate-xi Poisson process."""

    xi: float
    k: int

    def __post_init__(self):
        if not np.isfinite(self.xi) or self.xi <= 0:
            raise InvalidParameter(f"xi must be positive, got {self.xi}")
        if self.k < 1:
            raise InvalidParameter(f"k must be >= 1, got {self.k}")


SamplingScheme = Union[Equidistant, PoissonTimes]


@dataclass(frozen=True)
class GraphModelSpec:
    """Degree model plus the lifetime binding for the edge processes.

    ``homogeneous_side`` names the side ('on' or 'off') that follows
    ``homogeneous_dist`` on every edge; the opposite side is exponential
    with its per-edge rate derived from the stationarity constraint.
    ``divisor`` selects whether that constraint reads d_i d_j / m or
    d_i d_j / (2m).
    """

    degrees: Union[DegreeModel, InOutDegreeModel]
    homogeneous_side: str
    homogeneous_dist: LifetimeDist
    divisor: str = "m"

    def __post_init__(self):
        if self.homogeneous_side not in ("on", "off"):
            raise InvalidParameter(
                f"homogeneous_side must be 'on' or 'off', got {self.homogeneous_side!r}"
            )

    @property
    def n(self) -> int:
        return self.degrees.n

    def edge_probabilities(self) -> np.ndarray:
        return edge_probability_matrix(self.degrees, self.divisor)

    def is_exponential(self) -> bool:
        return isinstance(self.homogeneous_dist, Exponential)


@dataclass(frozen=True)
class EdgeSide:
    """Per-edge lifetime parameters for one side of the renewal cycle."""

    kind: str  # 'exponential' | 'weibull' | 'pareto'
    code: int
    p0: np.ndarray  # rate (exponential) or scale
    p1: np.ndarray  # shape; zeros for exponential
    homogeneous: bool

    def dist(self, index: int) -> LifetimeDist:
        if self.kind == "exponential":
            return Exponential(rate=float(self.p0[index]))
        if self.kind == "weibull":
            return Weibull(scale=float(self.p0[index]), shape=float(self.p1[index]))
        return Pareto(scale=float(self.p0[index]), shape=float(self.p1[index]))

    def hom_dist(self) -> LifetimeDist:
        return self.dist(0)


@dataclass(frozen=True)
class ResolvedEdges:
    """Stationary probabilities and lifetime pairs for all N^2 edges."""

    e: np.ndarray  # (E,) on-probabilities, row-major over (i, j)
    on: EdgeSide
    off: EdgeSide


def _side_from_dist(dist: LifetimeDist, n_edges: int) -> EdgeSide:
    code = DIST_CODES[type(dist)]
    if isinstance(dist, Exponential):
        return EdgeSide(
            kind="exponential",
            code=code,
            p0=np.full(n_edges, dist.rate),
            p1=np.zeros(n_edges),
            homogeneous=True,
        )
    kind = "weibull" if isinstance(dist, Weibull) else "pareto"
    return EdgeSide(
        kind=kind,
        code=code,
        p0=np.full(n_edges, dist.scale),
        p1=np.full(n_edges, dist.shape),
        homogeneous=True,
    )


def resolve_binding(spec: GraphModelSpec) -> ResolvedEdges:
    """Derive the per-edge exponential rates from the stationarity constraint.

    With the homogeneous side fixed, the opposite side's mean must equal
    hom_mean * (1 - e) / e (off derived) or hom_mean * e / (1 - e) scaled
    the other way around, so that mean_on / (mean_on + mean_off) = e holds
    on every edge.
    """
    e = spec.edge_probabilities().ravel()
    if np.any(e <= 0.0) or np.any(e >= 1.0):
        idx = int(np.argmax((e <= 0.0) | (e >= 1.0)))
        n = spec.n
        raise DegenerateEdge(
            f"edge ({idx // n + 1}, {idx % n + 1}) has on-probability "
            f"{e[idx]!r}; rates become degenerate"
        )
    n_edges = e.size
    hom_mean = spec.homogeneous_dist.mean()
    hom_side = _side_from_dist(spec.homogeneous_dist, n_edges)
    if spec.homogeneous_side == "on":
        # off is Exp with mean hom_mean * (1 - e) / e
        derived = EdgeSide(
            kind="exponential",
            code=0,
            p0=e / (hom_mean * (1.0 - e)),
            p1=np.zeros(n_edges),
            homogeneous=False,
        )
        return ResolvedEdges(e=e, on=hom_side, off=derived)
    derived = EdgeSide(
        kind="exponential",
        code=0,
        p0=(1.0 - e) / (hom_mean * e),
        p1=np.zeros(n_edges),
        homogeneous=False,
    )
    return ResolvedEdges(e=e, on=derived, off=hom_side)


@dataclass(frozen=True)
class SnapshotSeries:
    """Ordered (time, total edge count) observations from one run."""

    times: np.ndarray  # float64, strictly increasing
    counts: np.ndarray  # uint32
    scheme: Optional[SamplingScheme]
    seed: Optional[int]

    def __len__(self) -> int:
        return self.counts.size


def exp_skip_ahead_state(state: int, lam: float, mu: float, t: float, rng) -> int:
    """Sample the on/off state after elapsed time t for an Exp/Exp edge.

    Uses the two-state Markov transition law directly: starting from
    ``state`` (1 = on), the chain is on at time t with probability
    e + (state - e) * exp(-(lam + mu) * t), where e = lam / (lam + mu).
    """
    if lam <= 0 or mu <= 0:
        raise InvalidParameter("rates must be positive")
    if t < 0:
        raise InvalidParameter("elapsed time must be >= 0")
    e = lam / (lam + mu)
    p_on = e + (state - e) * np.exp(-(lam + mu) * t)
    return int(rng.random() < p_on)


def _sampling_times(scheme: SamplingScheme, rng: np.random.Generator) -> np.ndarray:
    if isinstance(scheme, Equidistant):
        return scheme.delta * np.arange(1, scheme.k + 1, dtype=float)
    gaps = -np.log(1.0 - rng.random(scheme.k)) / scheme.xi
    return np.cumsum(gaps)


def _raw_uniforms(bitgen, count: int) -> np.ndarray:
    # identical to Generator(bitgen).random(count) for PCG64-family streams
    raw = bitgen.random_raw(count)
    return (raw >> np.uint64(11)) * (1.0 / 9007199254740992.0)


def _initial_conditions(resolved: ResolvedEdges, bitgens) -> tuple[np.ndarray, np.ndarray]:
    """Stationary start: state ~ Bernoulli(e), first sojourn residual.

    Consumes exactly two uniforms from the head of every edge stream; the
    residual inverse-CDF transforms are applied vectorized per side.
    """
    n_edges = resolved.e.size
    u = np.empty((n_edges, 2))
    for idx, bg in enumerate(bitgens):
        u[idx] = _raw_uniforms(bg, 2)
    state = (u[:, 0] < resolved.e).astype(np.uint8)
    init_end = np.empty(n_edges)
    for side, mask in ((resolved.on, state == 1), (resolved.off, state == 0)):
        if not mask.any():
            continue
        init_end[mask] = _residual_quantiles(side, mask, 1.0 - u[mask, 1])
    return state, init_end


def _residual_quantiles(side: EdgeSide, mask: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Residual-lifetime quantiles at u in (0, 1] for the masked edges."""
    from .lifetimes import _gammainc_inverse

    p0 = side.p0[mask]
    p1 = side.p1[mask]
    if side.kind == "exponential":
        return -np.log(u) / p0
    if side.kind == "pareto":
        return p0 * (u ** (-1.0 / (p1 - 1.0)) - 1.0)
    # Weibull: invert the integrated-tail CDF P(1/shape, scale * t^shape)
    out = np.empty(u.size)
    for shape in np.unique(p1):
        sel = p1 == shape
        x = _gammainc_inverse(1.0 / shape, u[sel])
        out[sel] = (x / p0[sel]) ** (1.0 / shape)
    return out


def _spawn_streams(seed: int, n_edges: int):
    root = np.random.SeedSequence(seed)
    sampling_ss, edges_ss = root.spawn(2)
    sampling_rng = np.random.Generator(np.random.PCG64(sampling_ss))
    bitgens = [np.random.PCG64(child) for child in edges_ss.spawn(n_edges)]
    return sampling_rng, bitgens


def simulate(
    spec: GraphModelSpec,
    scheme: SamplingScheme,
    seed: int,
    engine: str = "auto",
    backend: Optional[str] = None,
) -> SnapshotSeries:
    """Simulate one stationary run and return its snapshot series.

    ``engine`` is 'auto' (skip-ahead when both lifetimes are exponential,
    event-driven otherwise), 'skip', or 'event'.  ``backend`` forces
    'cython' or 'python'; by default the compiled backend is used when
    available.
    """
    resolved = resolve_binding(spec)
    if engine == "auto":
        engine = "skip" if spec.is_exponential() else "event"
    if engine not in ("skip", "event"):
        raise InvalidParameter(f"unknown engine {engine!r}")
    if engine == "skip" and not spec.is_exponential():
        raise WrongFamily("skip-ahead engine requires exponential on- and off-times")
    kernels = _engine.get_backend(backend)

    n_edges = resolved.e.size
    sampling_rng, bitgens = _spawn_streams(seed, n_edges)
    times = _sampling_times(scheme, sampling_rng)
    counts = np.zeros(scheme.k, dtype=np.uint32)

    if engine == "skip":
        rate_sum = resolved.on.p0 + resolved.off.p0
        if isinstance(scheme, Equidistant):
            decay = np.exp(-rate_sum * scheme.delta)
            kernels.skip_counts_uniform(resolved.e, decay, scheme.k, bitgens, counts)
        else:
            gaps = np.diff(times, prepend=0.0)
            for lo in range(0, n_edges, _CHUNK_EDGES):
                hi = min(lo + _CHUNK_EDGES, n_edges)
                decay = np.exp(-np.outer(rate_sum[lo:hi], gaps))
                kernels.skip_counts_matrix(
                    resolved.e[lo:hi], decay, bitgens[lo:hi], counts
                )
    else:
        state, init_end = _initial_conditions(resolved, bitgens)
        kernels.renewal_counts(
            state,
            init_end,
            resolved.on.code,
            resolved.on.p0,
            resolved.on.p1,
            resolved.off.code,
            resolved.off.p0,
            resolved.off.p1,
            times,
            bitgens,
            counts,
        )

    times.setflags(write=False)
    counts.setflags(write=False)
    return SnapshotSeries(times=times, counts=counts, scheme=scheme, seed=seed)


# --- serialization -----------------------------------------------------------


def write_series_csv(series: SnapshotSeries, path) -> None:
    with open(path, "w") as fh:
        fh.write("k,time,count\n")
        for k, (t, c) in enumerate(zip(series.times, series.counts), start=1):
            fh.write(f"{k},{float(t)!r},{c}\n")


def read_series_csv(path) -> SnapshotSeries:
    times = []
    counts = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "k,time,count":
            raise InvalidParameter(f"unexpected series header {header!r}")
        for line in fh:
            _, t, c = line.rstrip("\n").split(",")
            times.append(float(t))
            counts.append(int(c))
    return SnapshotSeries(
        times=np.asarray(times),
        counts=np.asarray(counts, dtype=np.uint32),
        scheme=None,
        seed=None,
    )


_RECORD_DTYPE = np.dtype([("time", "<f8"), ("count", "<u4")])


def write_series_binary(series: SnapshotSeries, path) -> None:
    records = np.empty(len(series), dtype=_RECORD_DTYPE)
    records["time"] = series.times
    records["count"] = series.counts
    with open(path, "wb") as fh:
        fh.write(BINARY_MAGIC)
        fh.write(struct.pack("<Q", len(series)))
        fh.write(records.tobytes())


def read_series_binary(path) -> SnapshotSeries:
    with open(path, "rb") as fh:
        magic = fh.read(5)
        if magic != BINARY_MAGIC:
            raise InvalidParameter(f"bad magic {magic!r}, expected {BINARY_MAGIC!r}")
        (k,) = struct.unpack("<Q", fh.read(8))
        records = np.frombuffer(fh.read(k * _RECORD_DTYPE.itemsize), dtype=_RECORD_DTYPE)
    return SnapshotSeries(
        times=records["time"].astype(float),
        counts=records["count"].astype(np.uint32),
        scheme=None,
        seed=None,
    )
