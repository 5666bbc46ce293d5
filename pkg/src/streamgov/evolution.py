"""Time-varying diagnostics: rolling correlation matrices, eigenstructure
tracking, and rolling power spectral density of the governing process.

Window convention: an evaluation day t (1-based, t >= w) covers days
[t-w+1, t]. The normalized first eigenvalue of a correlation matrix is
lambda_1 / sum(lambda) = lambda_1 / n.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .ingest import Collection
from .spectral import welch_psd
from .ingest import detrend

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RollingEigenSeries:
    times: np.ndarray          # evaluation days, 1-based
    lambda1_norm: np.ndarray   # per time
    eigvec1_abs: np.ndarray    # (n_times, n) coefficient magnitudes
    coeff_variance: float

    def __post_init__(self):
        for name in ("times", "lambda1_norm", "eigvec1_abs"):
            a = np.asarray(getattr(self, name))
            a.setflags(write=False)
            object.__setattr__(self, name, a)


@dataclass(frozen=True)
class Spectrogram:
    """Per-window power spectra of one series; identical grids per window."""
    window_starts: np.ndarray   # 1-based first day of each window
    frequencies: np.ndarray
    values: np.ndarray          # (n_windows, n_freqs)

    def __post_init__(self):
        for name in ("window_starts", "frequencies", "values"):
            a = np.asarray(getattr(self, name))
            a.setflags(write=False)
            object.__setattr__(self, name, a)


def _window_correlation(window, context=""):
    """Pearson correlation of (n, w) rows with a zero-variance guard.

    A station constant over the window gets correlation 0 with every other
    station and 1 with itself; occurrences are logged.
    """
    centered = window - window.mean(axis=1, keepdims=True)
    scale = np.sqrt(np.einsum("it,it->i", centered, centered))
    degenerate = scale == 0.0
    if degenerate.any():
        logger.warning("zero-variance window%s for station rows %s",
                       f" {context}" if context else "",
                       np.flatnonzero(degenerate).tolist())
    safe = np.where(degenerate, 1.0, scale)
    u = centered / safe[:, None]
    corr = u @ u.T
    np.clip(corr, -1.0, 1.0, out=corr)
    corr[degenerate, :] = 0.0
    corr[:, degenerate] = 0.0
    np.fill_diagonal(corr, 1.0)
    corr = (corr + corr.T) / 2.0
    return corr


def rolling_correlation(collection, t, w):
    """Correlation matrix over days [t-w+1, t] (t is 1-based, w <= t <= T)."""
    x = collection.matrix() if isinstance(collection, Collection) else np.asarray(collection)
    t_len = x.shape[1]
    if not w <= t <= t_len:
        raise ValueError(f"need w <= t <= T, got t={t}, w={w}, T={t_len}")
    return _window_correlation(x[:, t - w: t], context=f"at t={t}")


def eigen_decompose(matrix):
    """Descending eigenvalues and sign-canonicalized orthonormal eigenvectors.

    Each eigenvector is flipped so its largest-magnitude coefficient is
    positive (first occurrence on ties).
    """
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("matrix must be square")
    if not np.allclose(m, m.T, atol=1e-10):
        raise ValueError("matrix must be symmetric")
    vals, vecs = np.linalg.eigh(m)
    order = np.argsort(vals)[::-1]
    vals = vals[order]
    vecs = vecs[:, order]
    for j in range(vecs.shape[1]):
        lead = int(np.argmax(np.abs(vecs[:, j])))
        if vecs[lead, j] < 0:
            vecs[:, j] = -vecs[:, j]
    return vals, vecs


def rolling_eigen_series(collection, w, stride=7):
    """First-eigenpair trajectory over rolling correlation windows.

    Evaluates at t = w, w+stride, ...; records lambda_1/sum(lambda) and the
    magnitudes of the first eigenvector's coefficients. The coefficient
    variance pools every stored magnitude across stations and times.
    """
    x = collection.matrix() if isinstance(collection, Collection) else np.asarray(collection)
    n, t_len = x.shape
    if not 2 <= w <= t_len:
        raise ValueError(f"need 2 <= w <= T, got w={w}, T={t_len}")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    times = np.arange(w, t_len + 1, stride, dtype=np.int64)
    lam = np.empty(times.size)
    vec = np.empty((times.size, n))
    for k, t in enumerate(times):
        corr = _window_correlation(x[:, t - w: t], context=f"at t={t}")
        vals, vecs = eigen_decompose(corr)
        lam[k] = vals[0] / vals.sum()
        vec[k] = np.abs(vecs[:, 0])
    return RollingEigenSeries(times, lam, vec, float(np.var(vec)))


def aligned_view(collection, offsets):
    """Collection with station i replaced by x_i(t + phi_i), common length
    T - max(phi)."""
    offsets = np.asarray(offsets, dtype=np.int64)
    if offsets.size != collection.n:
        raise ValueError("one offset per station required")
    t_new = collection.T - int(offsets.max())
    from .ingest import StationSeries
    stations = []
    for station, phi in zip(collection.stations, offsets):
        flow = station.flow[int(phi): int(phi) + t_new]
        stations.append(StationSeries(station.meta, flow, collection.start_date))
    return Collection(tuple(stations), t_new, collection.start_date)


def rolling_psd(g, window_len, window_stride, params, taper="hann"):
    """Welch spectrum of each detrended rolling window of a single series."""
    g = np.asarray(g, dtype=np.float64)
    if window_len > g.size:
        raise ValueError("window longer than series")
    if params.segment_length > window_len:
        raise ValueError("Welch segment longer than window")
    starts = np.arange(0, g.size - window_len + 1, window_stride, dtype=np.int64)
    rows = []
    for s in starts:
        spec = welch_psd(detrend(g[s: s + window_len]), params, taper=taper)
        rows.append(spec.values)
    freqs = np.arange(params.segment_length // 2 + 1) / params.segment_length
    return Spectrogram(starts + 1, freqs, np.vstack(rows))
