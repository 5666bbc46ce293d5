"""Periodogram and Welch power spectral density estimation, Whittle-deviance
parameter selection, and spectral affinity analysis.

All spectra use the orthonormal DFT scaling (1/sqrt(n)), so Parseval holds
as sum |Z|^2 = sum x^2 and the periodogram of a unit-variance white noise
series is flat at level ~1.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import pairwise_l1
from .temporal import to_affinity

TAPERS = ("hann", "rectangular")

# Default candidate grid for the collection-wide Whittle optimization.
DEFAULT_S_GRID = (250, 750, 1250, 1875, 2500, 3750, 4750, 7123)
DEFAULT_OMEGA_GRID = (0.0, 0.2, 0.4, 0.5, 0.6, 0.75)

SPECTRUM_FLOOR_FRAC = 1e-12


@dataclass(frozen=True)
class PowerSpectrum:
    """Half-spectrum on the Fourier grid j/n, j = 0..floor(n/2)."""
    frequencies: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.frequencies, dtype=np.float64)
        v = np.asarray(self.values, dtype=np.float64)
        f.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "values", v)
        if f.shape != v.shape or f.ndim != 1:
            raise ValueError("frequency/value shape mismatch")
        if f[0] != 0.0 or np.any(np.diff(f) <= 0) or f[-1] > 0.5:
            raise ValueError("frequencies must increase from 0 to at most 1/2")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValueError("spectral values must be finite and non-negative")


@dataclass(frozen=True)
class WelchParams:
    segment_length: int
    overlap: float

    def __post_init__(self):
        if self.segment_length < 2:
            raise ValueError("segment_length must be >= 2")
        if not 0.0 <= self.overlap <= 0.95:
            raise ValueError("overlap must lie in [0, 0.95]")
        if self.step < 1:
            raise ValueError("segment step must be >= 1")

    @property
    def step(self):
        return int(round(self.segment_length * (1.0 - self.overlap)))


def dft(x):
    """Orthonormal DFT with unit-based time indexing.

    Z(j/n) = n^{-1/2} * sum_{t=1..n} x(t) exp(-2*pi*i*j*t/n); the extra
    phase relative to numpy's convention leaves moduli unchanged.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    if n < 2:
        raise ValueError("need at least 2 samples")
    j = np.arange(n)
    return np.fft.fft(x) * np.exp(-2j * np.pi * j / n) / np.sqrt(n)


def periodogram(x):
    """Squared-modulus DFT on the half grid j/n, j = 0..floor(n/2)."""
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    m = n // 2 + 1
    z = dft(x)[:m]
    return PowerSpectrum(np.arange(m) / n, np.abs(z) ** 2)


def _taper(name, length):
    if name == "hann":
        return np.hanning(length)
    if name == "rectangular":
        return np.ones(length)
    raise ValueError(f"unknown taper {name!r}")


def segment_count(n, params):
    """Number of full segments Welch's method averages over."""
    if params.segment_length > n:
        raise ValueError(f"segment length {params.segment_length} > series length {n}")
    return (n - params.segment_length) // params.step + 1


def welch_psd(x, params, taper="hann"):
    """Averaged tapered periodogram over overlapping segments.

    Each segment is mean-removed and tapered; the periodogram scaling is
    corrected by the taper's mean square, so white noise yields a flat
    spectrum at the noise variance. Trailing samples that do not fill a
    full segment are discarded.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    s = params.segment_length
    nseg = segment_count(n, params)
    w = _taper(taper, s)
    msq = float(np.mean(w ** 2))
    m = s // 2 + 1
    acc = np.zeros(m)
    for k in range(nseg):
        seg = x[k * params.step: k * params.step + s]
        seg = (seg - seg.mean()) * w
        z = np.fft.fft(seg)[:m] / np.sqrt(s)
        acc += np.abs(z) ** 2 / msq
    return PowerSpectrum(np.arange(m) / s, acc / nseg)


def whittle_deviance(f, i_vals):
    """sum_j [log f_j + I_j / f_j]; smaller means a better spectral fit."""
    f = np.asarray(f, dtype=np.float64)
    i_vals = np.asarray(i_vals, dtype=np.float64)
    if f.shape != i_vals.shape:
        raise ValueError("grid mismatch between model and periodogram")
    if np.any(f <= 0):
        raise ValueError("model spectrum must be strictly positive")
    return float(np.sum(np.log(f) + i_vals / f))


def _interp_loglog(target_freqs, src_freqs, src_vals):
    """Linear interpolation of log(value) against log(frequency).

    The zero-frequency bin must be excluded from both grids beforehand.
    Values are floored at SPECTRUM_FLOOR_FRAC * max before taking logs.
    """
    floor = SPECTRUM_FLOOR_FRAC * src_vals.max()
    logv = np.log(np.maximum(src_vals, floor))
    out = np.interp(np.log(target_freqs), np.log(src_freqs), logv)
    return np.exp(out)


def station_deviance(x, params, pgram=None, taper="hann"):
    """Whittle deviance of a Welch estimate against the full periodogram.

    The Welch estimate is interpolated (log-log) onto the periodogram grid;
    the zero-frequency bin is excluded from the sum.
    """
    if pgram is None:
        pgram = periodogram(x)
    w = welch_psd(x, params, taper=taper)
    model = _interp_loglog(pgram.frequencies[1:], w.frequencies[1:], w.values[1:])
    floor = SPECTRUM_FLOOR_FRAC * max(w.values.max(), np.finfo(float).tiny)
    model = np.maximum(model, floor)
    return whittle_deviance(model, pgram.values[1:])


def optimize_welch_params(collection, s_grid=None, omega_grid=None, taper="hann"):
    """Exhaustive grid search minimizing the summed Whittle deviance.

    Returns (best WelchParams, report). The report lists every evaluated
    candidate with its collection-wide deviance. Ties are broken by smaller
    segment length, then smaller overlap.
    """
    s_grid = tuple(DEFAULT_S_GRID if s_grid is None else s_grid)
    omega_grid = tuple(DEFAULT_OMEGA_GRID if omega_grid is None else omega_grid)
    if not s_grid or not omega_grid:
        raise ValueError("empty parameter grid")

    from .ingest import detrend
    series = [detrend(s.flow) for s in collection.stations]
    pgrams = [periodogram(x) for x in series]

    entries = []
    for s in sorted(s_grid):
        for om in sorted(omega_grid):
            params = WelchParams(int(s), float(om))
            total = 0.0
            for x, pg in zip(series, pgrams):
                total += station_deviance(x, params, pgram=pg, taper=taper)
            entries.append({"S": int(s), "omega": float(om), "deviance": total})
    best = min(entries, key=lambda e: (e["deviance"], e["S"], e["omega"]))
    report = {
        "grid": [{"S": e["S"], "omega": e["omega"]} for e in entries],
        "deviance": [e["deviance"] for e in entries],
        "selected": {"S": best["S"], "omega": best["omega"]},
    }
    return WelchParams(best["S"], best["omega"]), report


def spectral_trajectories(collection, params, taper="hann"):
    """L1-normalized Welch spectra for every station, common frequency grid."""
    from .ingest import detrend
    rows = []
    for s in collection.stations:
        spec = welch_psd(detrend(s.flow), params, taper=taper)
        total = spec.values.sum()
        if total <= 0:
            raise ValueError(f"{s.meta.station_id}: zero spectral mass")
        rows.append(spec.values / total)
    freqs = np.arange(params.segment_length // 2 + 1) / params.segment_length
    return freqs, np.vstack(rows)


def spectral_affinity(collection, params, taper="hann"):
    """Affinity matrix of L1 distances between normalized Welch spectra."""
    _, rows = spectral_trajectories(collection, params, taper=taper)
    d = pairwise_l1(rows)
    return to_affinity(d, domain_tag="spectral",
                       station_ids=tuple(collection.station_ids))
