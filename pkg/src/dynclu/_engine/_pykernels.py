"""Pure-numpy simulation kernels (fallback backend).

The skip-ahead kernels vectorize the two-state Markov updates over edges
and steps; the sequential state dependence is resolved by a forward fill
of the last "decided" step (a step whose uniform lands below the
turn-on threshold or above the stay-on threshold).  Threshold
expressions mirror the compiled kernels operation for operation so both
backends produce identical series from identical streams.
"""

from __future__ import annotations

import math

import numpy as np

_CHUNK = 32


def _generator(bitgen) -> np.random.Generator:
    return np.random.Generator(bitgen)


def _skip_fill(u, e_col, decay, s0, counts):
    # thresholds: turn-on regardless = e - e*r, stay-on = e + (1-e)*r
    a = u < e_col - e_col * decay
    b = u < e_col + (1.0 - e_col) * decay
    k = u.shape[1]
    decided = a | ~b
    idx = np.where(decided, np.arange(k, dtype=np.int32), np.int32(-1))
    np.maximum.accumulate(idx, axis=1, out=idx)
    vals = np.take_along_axis(a, np.maximum(idx, 0).astype(np.intp), axis=1)
    state = np.where(idx >= 0, vals, s0[:, None])
    counts += state.sum(axis=0, dtype=np.uint32)


def skip_counts_uniform(e, decay, k, bitgens, counts):
    """Skip-ahead with one decay factor per edge (equidistant sampling)."""
    n_edges = e.size
    for lo in range(0, n_edges, _CHUNK):
        hi = min(lo + _CHUNK, n_edges)
        u = np.empty((hi - lo, k + 1))
        for row, bg in enumerate(bitgens[lo:hi]):
            u[row] = _generator(bg).random(k + 1)
        s0 = u[:, 0] < e[lo:hi]
        _skip_fill(u[:, 1:], e[lo:hi, None], decay[lo:hi, None], s0, counts)


def skip_counts_matrix(e, decay, bitgens, counts):
    """Skip-ahead with per-edge, per-step decay factors (Poisson sampling)."""
    n_edges, k = decay.shape
    u = np.empty((n_edges, k + 1))
    for row, bg in enumerate(bitgens):
        u[row] = _generator(bg).random(k + 1)
    s0 = u[:, 0] < e
    _skip_fill(u[:, 1:], e[:, None], decay, s0, counts)


def _mean_of(code, p0, p1):
    if code == 0:
        return 1.0 / p0
    if code == 1:
        return p0 ** (-1.0 / p1) * math.gamma(1.0 + 1.0 / p1)
    return p0 / (p1 - 1.0)


def _inv_duration(code, p0, p1, u):
    if code == 0:
        return -np.log(u) / p0
    if code == 1:
        return (-np.log(u) / p0) ** (1.0 / p1)
    return p0 * (u ** (-1.0 / p1) - 1.0)


def renewal_counts(
    init_state,
    init_end,
    on_code,
    on_p0,
    on_p1,
    off_code,
    off_p0,
    off_p1,
    times,
    bitgens,
    counts,
):
    """General event-driven engine, one edge at a time.

    Sojourn end times are accumulated in bulk until the sampling horizon
    is covered, then each sampling time is located in the renewal
    timeline with a binary search; the parity of the covering sojourn
    determines the state.
    """
    k = times.size
    horizon = times[-1]
    n_edges = init_state.size
    for i in range(n_edges):
        gen = _generator(bitgens[i])
        s0 = int(init_state[i])
        cycle = _mean_of(on_code, on_p0[i], on_p1[i]) + _mean_of(
            off_code, off_p0[i], off_p1[i]
        )
        blocks = [np.array([init_end[i]])]
        last = init_end[i]
        n_sojourns = 0
        while last <= horizon:
            need = max(16, int((horizon - last) / cycle * 1.25) + 8)
            u = 1.0 - gen.random(need)
            sojourn_idx = np.arange(n_sojourns + 1, n_sojourns + need + 1)
            on = ((sojourn_idx & 1) ^ s0) == 1
            dur = np.where(
                on,
                _inv_duration(on_code, on_p0[i], on_p1[i], u),
                _inv_duration(off_code, off_p0[i], off_p1[i], u),
            )
            blocks.append(last + np.cumsum(dur))
            last = blocks[-1][-1]
            n_sojourns += need
        ends = np.concatenate(blocks) if len(blocks) > 1 else blocks[0]
        j = np.searchsorted(ends, times, side="right")
        counts += ((j & 1) ^ s0).astype(np.uint32)
