"""Deterministic synthetic streamflow generator.

Provides ground-truth collections for the alignment, clustering and
spectral test oracles: a template series is circularly delayed per station
by a planted offset, seeded Gaussian noise is added, and the result is
clipped at zero. Randomness comes from a counter-based 64-bit generator
(Philox) with an explicit Box-Muller transform, so outputs are portable.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import date
from pathlib import Path

import numpy as np

from .ingest import Collection, StationMeta, StationSeries, write_collection

TEMPLATES = ("annual_pulse", "sinusoid", "white_noise", "two_block")

PULSE_PERIOD = 365
PULSE_DAY = 100          # pulse position within each period
PULSE_WIDTH = 3
PULSE_BASELINE = 0.05
DEFAULT_START = date(2000, 1, 1)


@dataclass(frozen=True)
class SynthSpec:
    n: int
    T: int
    template: str = "annual_pulse"
    offsets: tuple = ()
    noise_std: float = 0.0
    seed: int = 0
    period: float = 365.0     # sinusoid and two_block second-block period

    def __post_init__(self):
        object.__setattr__(self, "offsets", tuple(int(p) for p in self.offsets))
        if self.template not in TEMPLATES:
            raise ValueError(f"unknown template {self.template!r}")
        if self.n < 2 or self.T < 2:
            raise ValueError("need n >= 2 and T >= 2")
        if self.offsets and len(self.offsets) != self.n:
            raise ValueError("offsets must be empty or length n")
        if any(not 0 <= p <= 365 for p in self.offsets):
            raise ValueError("offsets must lie in {0..365}")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")


def _rng(seed):
    return np.random.Generator(np.random.Philox(seed))


def _gaussian(rng, size):
    """Box-Muller normals from counter-based uniforms."""
    m = int(np.prod(size)) if not np.isscalar(size) else int(size)
    pairs = (m + 1) // 2
    u1 = rng.random(pairs)
    u2 = rng.random(pairs)
    r = np.sqrt(-2.0 * np.log1p(-u1))    # 1-u1 in (0,1], log argument never 0
    z = np.concatenate([r * np.cos(2 * np.pi * u2), r * np.sin(2 * np.pi * u2)])
    return z[:m].reshape(size)


def _annual_pulse_template(t_len, rng):
    """One sharp positive pulse per 365-day period over a low baseline.

    Per-year pulse amplitudes vary (seeded), so circular shifts of the
    template are distinguishable beyond one period.
    """
    tpl = np.full(t_len, PULSE_BASELINE)
    n_years = max(1, -(-t_len // PULSE_PERIOD))
    amps = rng.uniform(0.2, 1.8, size=n_years)
    for y in range(n_years):
        start = y * PULSE_PERIOD + PULSE_DAY
        if start >= t_len:
            break
        tpl[start: start + PULSE_WIDTH] += amps[y]
    return tpl


def _sinusoid_template(t_len, period):
    t = np.arange(t_len)
    return 0.5 * (1.0 + np.sin(2 * np.pi * t / period))


def generate(spec, start_date=DEFAULT_START):
    """Build a synthetic Collection plus its ground truth.

    Returns (collection, truth) where truth carries the planted offsets and,
    for two_block, the planted block labels.
    """
    rng = _rng(spec.seed)
    offsets = np.array(spec.offsets if spec.offsets else [0] * spec.n,
                       dtype=np.int64)
    labels = np.zeros(spec.n, dtype=np.int64)

    if spec.template == "annual_pulse":
        templates = [_annual_pulse_template(spec.T, rng)] * spec.n
    elif spec.template == "sinusoid":
        templates = [_sinusoid_template(spec.T, spec.period)] * spec.n
    elif spec.template == "white_noise":
        base = np.abs(_gaussian(rng, spec.T)) + PULSE_BASELINE
        templates = [base] * spec.n
    else:  # two_block: two distinct templates split across stations
        a = _annual_pulse_template(spec.T, rng)
        b = _sinusoid_template(spec.T, spec.period)
        half = spec.n // 2
        labels[half:] = 1
        templates = [a] * half + [b] * (spec.n - half)

    amplitude = max(float(np.max(np.abs(t))) for t in templates)
    rows = np.empty((spec.n, spec.T))
    for i in range(spec.n):
        shifted = np.roll(templates[i], int(offsets[i]))
        noise = spec.noise_std * amplitude * _gaussian(rng, spec.T) \
            if spec.noise_std > 0 else 0.0
        rows[i] = np.clip(shifted + noise, 0.0, None)

    stations = []
    width = len(str(spec.n))
    for i in range(spec.n):
        meta = StationMeta(
            station_id=f"S{i:0{width}d}",
            name=f"synthetic station {i}",
            latitude=-40.0 + 25.0 * i / max(spec.n - 1, 1),
            longitude=115.0 + 35.0 * i / max(spec.n - 1, 1),
            state=("ACT", "NT", "NSW", "QLD", "SA", "TAS", "VIC", "WA")[i % 8],
        )
        stations.append(StationSeries(meta, rows[i], start_date))
    collection = Collection(tuple(stations), spec.T, start_date)
    truth = {
        "offsets": {s.meta.station_id: int(p)
                    for s, p in zip(stations, offsets)},
        "labels": {s.meta.station_id: int(l)
                   for s, l in zip(stations, labels)},
        "template": spec.template,
        "seed": spec.seed,
    }
    return collection, truth


def sample_offsets(n, seed, zero_fraction=0.3, zero_margin=10):
    """Seeded planted offsets in {0..365} with a mass at zero.

    A fraction of exactly-zero offsets anchors the governing process at the
    unshifted template; without it the alignment optimum is only defined up
    to a common shift of every offset. Offsets closer to zero than
    ``zero_margin`` are snapped to zero so the anchor cannot be out-voted
    by a near-zero cluster within the pulse width.
    """
    rng = _rng(seed)
    offs = rng.integers(0, 366, size=n)
    n_zero = max(1, int(round(zero_fraction * n)))
    zero_idx = rng.permutation(n)[:n_zero]
    offs[zero_idx] = 0
    offs[offs < zero_margin] = 0
    return tuple(int(v) for v in offs)


def write_synthetic(spec, path, start_date=DEFAULT_START):
    """Emit the CSV layout that ingest consumes, plus truth.json."""
    collection, truth = generate(spec, start_date=start_date)
    write_collection(collection, path)
    with open(Path(path) / "truth.json", "w") as fh:
        json.dump(truth, fh, indent=2, sort_keys=True)
    return collection, truth
