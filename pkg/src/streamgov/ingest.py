"""Loading, validation and detrending of daily streamflow collections.

A collection lives on disk as one ``metadata.csv`` plus one flow CSV per
station (``<station_id>.csv`` with header ``date,flow``, ISO dates, ``NA``
marking gaps). In memory it is an ordered, immutable list of station series
sharing a common date range.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import date, timedelta
from pathlib import Path

import numpy as np

STATES = ("ACT", "NT", "NSW", "QLD", "SA", "TAS", "VIC", "WA")

METADATA_FILENAME = "metadata.csv"
METADATA_HEADER = ["station_id", "name", "latitude", "longitude", "state"]
GAP_SENTINEL = "NA"
GAP_POLICIES = ("reject", "linear")
MAX_LINEAR_GAP = 7


class DataError(ValueError):
    """Invalid or inconsistent input data."""


@dataclass(frozen=True)
class StationMeta:
    station_id: str
    name: str
    latitude: float
    longitude: float
    state: str

    def __post_init__(self):
        if not self.station_id or any(c.isspace() for c in self.station_id):
            raise DataError(f"invalid station_id {self.station_id!r}")
        if not -90.0 <= self.latitude <= 90.0:
            raise DataError(f"{self.station_id}: latitude {self.latitude} out of bounds")
        if not -180.0 <= self.longitude <= 180.0:
            raise DataError(f"{self.station_id}: longitude {self.longitude} out of bounds")
        if self.state not in STATES:
            raise DataError(f"{self.station_id}: unknown state {self.state!r}")


@dataclass(frozen=True)
class StationSeries:
    meta: StationMeta
    flow: np.ndarray
    start_date: date

    def __post_init__(self):
        flow = np.asarray(self.flow, dtype=np.float64)
        flow.setflags(write=False)
        object.__setattr__(self, "flow", flow)
        if flow.ndim != 1 or flow.size == 0:
            raise DataError(f"{self.meta.station_id}: flow must be a non-empty vector")
        if not np.all(np.isfinite(flow)):
            raise DataError(f"{self.meta.station_id}: non-finite flow value")
        if np.any(flow < 0):
            raise DataError(f"{self.meta.station_id}: negative flow value")


@dataclass(frozen=True)
class Collection:
    stations: tuple
    T: int
    start_date: date

    def __post_init__(self):
        object.__setattr__(self, "stations", tuple(self.stations))
        if len(self.stations) < 2:
            raise DataError("a collection needs at least 2 stations")
        ids = [s.meta.station_id for s in self.stations]
        if len(set(ids)) != len(ids):
            raise DataError("duplicate station ids in collection")
        for s in self.stations:
            if s.flow.size != self.T:
                raise DataError(f"{s.meta.station_id}: length {s.flow.size} != T={self.T}")
            if s.start_date != self.start_date:
                raise DataError(f"{s.meta.station_id}: start date mismatch")

    @property
    def n(self):
        return len(self.stations)

    @property
    def station_ids(self):
        return [s.meta.station_id for s in self.stations]

    def matrix(self):
        """(n, T) array of flows, row order = station order."""
        return np.vstack([s.flow for s in self.stations])


@dataclass(frozen=True)
class IngestConfig:
    start_date: date
    end_date: date
    gap_policy: str = "reject"

    def __post_init__(self):
        if self.end_date < self.start_date:
            raise DataError("end_date before start_date")
        if self.gap_policy not in GAP_POLICIES:
            raise DataError(f"unknown gap policy {self.gap_policy!r}")

    @property
    def T(self):
        return (self.end_date - self.start_date).days + 1


def _fill_vector(flow, policy, station_id):
    """Resolve NaN gaps in a raw flow vector according to the gap policy."""
    gaps = np.isnan(flow)
    if not gaps.any():
        return flow
    if policy == "reject":
        row = int(np.flatnonzero(gaps)[0]) + 1
        raise DataError(f"{station_id}: gap at row {row} (policy reject)")
    if gaps[0] or gaps[-1]:
        raise DataError(f"{station_id}: gap at series boundary")
    # interior runs only; interpolate runs of length <= MAX_LINEAR_GAP
    idx = np.flatnonzero(gaps)
    run_start = idx[np.r_[True, np.diff(idx) > 1]]
    run_end = idx[np.r_[np.diff(idx) > 1, True]]
    for a, b in zip(run_start, run_end):
        if b - a + 1 > MAX_LINEAR_GAP:
            raise DataError(
                f"{station_id}: gap of {b - a + 1} days at row {a + 1} "
                f"exceeds limit {MAX_LINEAR_GAP}"
            )
    out = flow.copy()
    good = ~gaps
    out[gaps] = np.interp(idx, np.flatnonzero(good), flow[good])
    return out


def fill_gaps(series, policy):
    """Resolve NaN-marked gaps under ``policy``.

    Accepts either a raw flow vector (returns the filled vector) or a
    StationSeries (returns a new StationSeries).
    """
    if policy not in GAP_POLICIES:
        raise DataError(f"unknown gap policy {policy!r}")
    if isinstance(series, StationSeries):
        flow = _fill_vector(np.array(series.flow, dtype=np.float64), policy,
                            series.meta.station_id)
        return StationSeries(series.meta, flow, series.start_date)
    return _fill_vector(np.array(series, dtype=np.float64), policy, "series")


def detrend(x):
    """Remove the arithmetic mean. Idempotent."""
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        raise ValueError("empty vector")
    return x - x.mean()


def _read_metadata(path):
    metas = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != METADATA_HEADER:
            raise DataError(f"{path}: bad metadata header {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 5:
                raise DataError(f"{path}:{lineno}: expected 5 fields")
            sid, name, lat, lon, state = row
            try:
                meta = StationMeta(sid, name, float(lat), float(lon), state)
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
            if sid in metas:
                raise DataError(f"{path}:{lineno}: duplicate station_id {sid!r}")
            metas[sid] = meta
    return metas


def _read_flow_file(path, config, station_id):
    expected = config.start_date
    values = np.empty(config.T, dtype=np.float64)
    count = 0
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["date", "flow"]:
            raise DataError(f"{station_id}: bad flow header {header} in {path}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise DataError(f"{station_id}: row {lineno}: expected 2 fields")
            try:
                d = date.fromisoformat(row[0])
            except ValueError:
                raise DataError(f"{station_id}: row {lineno}: bad date {row[0]!r}") from None
            if count >= config.T or d != expected:
                raise DataError(
                    f"{station_id}: row {lineno}: date {d.isoformat()} does not "
                    f"match configured range"
                )
            raw = row[1].strip()
            if raw == GAP_SENTINEL:
                v = math.nan
            else:
                try:
                    v = float(raw)
                except ValueError:
                    raise DataError(
                        f"{station_id}: row {lineno}: non-numeric flow {raw!r}"
                    ) from None
                if not math.isfinite(v):
                    raise DataError(f"{station_id}: row {lineno}: non-finite flow")
                if v < 0:
                    raise DataError(f"{station_id}: row {lineno}: negative flow {raw}")
            values[count] = v
            count += 1
            expected = expected + timedelta(days=1)
    if count != config.T:
        raise DataError(
            f"{station_id}: {count} rows, expected {config.T} for configured range"
        )
    return _fill_vector(values, config.gap_policy, station_id)


def load_collection(path, config, threads=None):
    """Load every station under ``path`` for the configured date range.

    Station order in the returned Collection is ascending by station_id.
    File parsing runs on a thread pool; the result is order-independent.
    """
    root = Path(path)
    meta_path = root / METADATA_FILENAME
    if not meta_path.is_file():
        raise DataError(f"missing {meta_path}")
    metas = _read_metadata(meta_path)

    flow_files = {p.stem: p for p in sorted(root.glob("*.csv"))
                  if p.name != METADATA_FILENAME}
    missing_meta = sorted(set(flow_files) - set(metas))
    if missing_meta:
        raise DataError(f"flow files without metadata: {', '.join(missing_meta)}")
    missing_flow = sorted(set(metas) - set(flow_files))
    if missing_flow:
        raise DataError(f"metadata without flow files: {', '.join(missing_flow)}")

    order = sorted(metas)

    def build(sid):
        flow = _read_flow_file(flow_files[sid], config, sid)
        return StationSeries(metas[sid], flow, config.start_date)

    if threads is not None and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            stations = list(pool.map(build, order))
    else:
        stations = [build(sid) for sid in order]
    return Collection(tuple(stations), config.T, config.start_date)


def write_collection(collection, path):
    """Write a collection in the on-disk layout that load_collection reads."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    with open(root / METADATA_FILENAME, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(METADATA_HEADER)
        for s in collection.stations:
            m = s.meta
            writer.writerow([m.station_id, m.name,
                             format(m.latitude, ".17g"),
                             format(m.longitude, ".17g"), m.state])
    for s in collection.stations:
        with open(root / f"{s.meta.station_id}.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["date", "flow"])
            d = s.start_date
            for v in s.flow:
                writer.writerow([d.isoformat(), format(v, ".17g")])
                d = d + timedelta(days=1)
