"""Estimation of a collection-wide governing process by alternating
minimization of a truncated L2 alignment loss.

Each station i gets an integer offset phi_i in {0..max_offset}; the
governing series g minimizes the summed squared error against the shifted
stations. Updates alternate between per-station offset argmins and the
pointwise mean over contributing stations, starting from the unshifted
mean.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import offset_scan

MAX_OFFSET = 365


@dataclass(frozen=True)
class GoverningProcess:
    g: np.ndarray
    offsets: np.ndarray
    loss_history: tuple
    iterations: int
    converged: bool

    def __post_init__(self):
        g = np.asarray(self.g, dtype=np.float64)
        offs = np.asarray(self.offsets, dtype=np.int64)
        g.setflags(write=False)
        offs.setflags(write=False)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "offsets", offs)
        object.__setattr__(self, "loss_history", tuple(self.loss_history))
        if np.any(offs < 0) or np.any(offs > MAX_OFFSET):
            raise ValueError("offsets out of bounds")


@dataclass(frozen=True)
class StateOffsetStats:
    n_stations: int
    n_nonzero: int
    percent_nonzero: float
    median_nonzero: float | None


def _as_matrix(collection):
    if isinstance(collection, np.ndarray):
        return np.ascontiguousarray(collection, dtype=np.float64)
    return np.ascontiguousarray(collection.matrix())


def alignment_loss(collection, g, offsets):
    """sum_i sum_{t=1..T-phi_i} (x_i(t + phi_i) - g(t))^2, exactly as written."""
    x = _as_matrix(collection)
    g = np.asarray(g, dtype=np.float64)
    n, t_len = x.shape
    if g.size != t_len:
        raise ValueError("governing series length mismatch")
    offsets = np.asarray(offsets, dtype=np.int64)
    total = 0.0
    for i in range(n):
        s = int(offsets[i])
        r = x[i, s:] - g[: t_len - s]
        total += float(r @ r)
    return total


def update_offsets(collection, g, max_offset=MAX_OFFSET, normalized=True):
    """Per-station argmin offset against g; ties pick the smaller offset.

    With ``normalized`` the per-station truncated loss is divided by the
    number of summed terms before comparing candidate offsets, so larger
    shifts are not rewarded merely for summing fewer terms.
    """
    x = _as_matrix(collection)
    g = np.ascontiguousarray(g, dtype=np.float64)
    if g.size != x.shape[1]:
        raise ValueError("governing series length mismatch")
    return offset_scan(x, g, max_offset, normalized)


def update_governing(collection, offsets, fallback=None):
    """g(t) = mean over stations with t <= T - phi_i of x_i(t + phi_i).

    Indices past T - max(phi) have no contributing station and never enter
    the alignment loss; they are filled from ``fallback`` (the previous
    governing series) when given, otherwise the update raises.
    """
    x = _as_matrix(collection)
    n, t_len = x.shape
    offsets = np.asarray(offsets, dtype=np.int64)
    acc = np.zeros(t_len)
    cnt = np.zeros(t_len)
    for i in range(n):
        s = int(offsets[i])
        acc[: t_len - s] += x[i, s:]
        cnt[: t_len - s] += 1.0
    empty = cnt == 0
    if empty.any():
        if fallback is None:
            raise ValueError("no station contributes at some index")
        acc[empty] = np.asarray(fallback, dtype=np.float64)[empty]
        cnt[empty] = 1.0
    return acc / cnt


def estimate_governing_process(collection, max_iters=50, tol=1e-8,
                               max_offset=MAX_OFFSET, normalized=True):
    """Alternate offset and governing-mean updates until a fixed point.

    Stops when offsets are unchanged between iterations, the loss decreases
    by less than ``tol`` (relative), or ``max_iters`` is reached. The loss
    history records the alignment loss after each full update pair.
    """
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    x = _as_matrix(collection)
    g = x.mean(axis=0)
    offsets = np.zeros(x.shape[0], dtype=np.int64)
    history = []
    converged = False
    iterations = 0
    for _ in range(max_iters):
        iterations += 1
        new_offsets = update_offsets(x, g, max_offset=max_offset,
                                     normalized=normalized)
        g = update_governing(x, new_offsets, fallback=g)
        loss = alignment_loss(x, g, new_offsets)
        unchanged = np.array_equal(new_offsets, offsets)
        offsets = new_offsets
        if history:
            prev = history[-1]
            small = abs(prev - loss) <= tol * max(abs(prev), 1.0)
        else:
            small = False
        history.append(loss)
        if unchanged or small:
            converged = True
            break
    return GoverningProcess(g, offsets, tuple(history), iterations, converged)


def summarize_offsets(process, collection):
    """Per-state non-zero offset counts, percentages and medians.

    The median is over non-zero offsets only and is None for states whose
    stations all have offset zero. Percentages are of the state's station
    count. States absent from the collection are omitted.
    """
    by_state = {}
    for station, phi in zip(collection.stations, process.offsets):
        by_state.setdefault(station.meta.state, []).append(int(phi))
    out = {}
    for state in sorted(by_state):
        offs = by_state[state]
        nonzero = sorted(v for v in offs if v != 0)
        median = float(np.median(nonzero)) if nonzero else None
        out[state] = StateOffsetStats(
            n_stations=len(offs),
            n_nonzero=len(nonzero),
            percent_nonzero=100.0 * len(nonzero) / len(offs),
            median_nonzero=median,
        )
    return out
