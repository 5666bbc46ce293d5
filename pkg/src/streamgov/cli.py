"""Command-line front end.

Usage: ``streamgov <subcommand> --config <file> [--out <dir>] [--threads N]``

Subcommands: ingest-check, temporal, spectral, optimize-welch, align,
evolve, spatial, synth, all. Each writes only its documented files plus a
``manifest.json`` under the output directory. Exit codes: 2 invalid config,
3 data error, 4 internal invariant violation.

The config file is INI-style (``key = value`` under ``[section]``):

    [data]       path, start_date, end_date (ISO dates), gap_policy
    [temporal]   linkage (average|single|complete)
    [welch]      segment_length, overlap, s_grid, omega_grid (comma lists)
    [alignment]  max_iters, tol, normalized, max_offset
    [evolution]  window, stride, psd_window, psd_stride,
                 psd_segment_length, psd_overlap
    [spatial]    k_min, k_max, seed, restarts
    [synth]      n, T, template, noise_std, seed, offsets
                 (comma list or "random"), zero_fraction, period

All sections other than the ones a subcommand needs may be omitted;
numeric output uses 17 significant digits so reruns are byte-comparable.
"""
from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import sys
import time
from datetime import date
from pathlib import Path

import numpy as np

from . import __version__
from . import alignment as align_mod
from . import evolution, spatial, spectral, synth, temporal
from .ingest import DataError, IngestConfig, load_collection

SUBCOMMANDS = ("ingest-check", "temporal", "spectral", "optimize-welch",
               "align", "evolve", "spatial", "synth", "all")

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_INTERNAL = 4


class ConfigError(ValueError):
    """Invalid run configuration."""


class InvariantError(AssertionError):
    """Internal invariant violated."""


def _fmt(v):
    return format(float(v), ".17g")


class RunConfig:
    """Parsed, validated configuration for one invocation."""

    def __init__(self, path):
        self.path = Path(path)
        if not self.path.is_file():
            raise ConfigError(f"config file not found: {path}")
        self.raw = self.path.read_bytes()
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        try:
            parser.read_string(self.raw.decode("utf-8"))
        except (configparser.Error, UnicodeDecodeError) as exc:
            raise ConfigError(f"cannot parse config: {exc}") from None
        self.parser = parser

    def sha256(self):
        return hashlib.sha256(self.raw).hexdigest()

    def _get(self, section, key, default=None, required=False):
        if self.parser.has_option(section, key):
            return self.parser.get(section, key).strip()
        if required:
            raise ConfigError(f"missing [{section}] {key}")
        return default

    def get_str(self, section, key, default=None, required=False, choices=None):
        v = self._get(section, key, default, required)
        if v is not None and choices is not None and v not in choices:
            raise ConfigError(f"[{section}] {key}: {v!r} not in {choices}")
        return v

    def get_int(self, section, key, default=None, required=False):
        v = self._get(section, key, required=required)
        if v is None:
            return default
        try:
            return int(v)
        except ValueError:
            raise ConfigError(f"[{section}] {key}: {v!r} is not an integer") from None

    def get_float(self, section, key, default=None, required=False):
        v = self._get(section, key, required=required)
        if v is None:
            return default
        try:
            return float(v)
        except ValueError:
            raise ConfigError(f"[{section}] {key}: {v!r} is not a number") from None

    def get_bool(self, section, key, default=None):
        v = self._get(section, key)
        if v is None:
            return default
        low = v.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"[{section}] {key}: {v!r} is not a boolean")

    def get_date(self, section, key, required=False):
        v = self._get(section, key, required=required)
        if v is None:
            return None
        try:
            return date.fromisoformat(v)
        except ValueError:
            raise ConfigError(f"[{section}] {key}: bad date {v!r}") from None

    def get_list(self, section, key, cast, default=None):
        v = self._get(section, key)
        if v is None:
            return default
        try:
            return tuple(cast(part.strip()) for part in v.split(",") if part.strip())
        except ValueError:
            raise ConfigError(f"[{section}] {key}: bad list {v!r}") from None

    # Assembled parameter blocks (fail fast, before any computation).

    def ingest_config(self):
        start = self.get_date("data", "start_date", required=True)
        end = self.get_date("data", "end_date", required=True)
        policy = self.get_str("data", "gap_policy", default="reject",
                              choices=("reject", "linear"))
        try:
            return IngestConfig(start, end, policy)
        except DataError as exc:
            raise ConfigError(str(exc)) from None

    def data_path(self):
        return self.get_str("data", "path", required=True)

    def welch_params(self):
        s = self.get_int("welch", "segment_length", default=3750)
        om = self.get_float("welch", "overlap", default=0.4)
        try:
            return spectral.WelchParams(s, om)
        except ValueError as exc:
            raise ConfigError(f"[welch] {exc}") from None

    def welch_grid(self):
        s_grid = self.get_list("welch", "s_grid", int,
                               default=spectral.DEFAULT_S_GRID)
        omega_grid = self.get_list("welch", "omega_grid", float,
                                   default=spectral.DEFAULT_OMEGA_GRID)
        if not s_grid or not omega_grid:
            raise ConfigError("[welch] empty parameter grid")
        return s_grid, omega_grid

    def alignment_params(self):
        p = {
            "max_iters": self.get_int("alignment", "max_iters", default=50),
            "tol": self.get_float("alignment", "tol", default=1e-8),
            "normalized": self.get_bool("alignment", "normalized", default=True),
            "max_offset": self.get_int("alignment", "max_offset", default=365),
        }
        if p["max_iters"] < 1 or p["tol"] < 0 or p["max_offset"] < 0:
            raise ConfigError("[alignment] invalid parameters")
        return p

    def evolution_params(self):
        p = {
            "window": self.get_int("evolution", "window", default=365),
            "stride": self.get_int("evolution", "stride", default=7),
            "psd_window": self.get_int("evolution", "psd_window", default=1460),
            "psd_stride": self.get_int("evolution", "psd_stride", default=365),
        }
        s = self.get_int("evolution", "psd_segment_length", default=365)
        om = self.get_float("evolution", "psd_overlap", default=0.5)
        if p["window"] < 2 or p["stride"] < 1 or p["psd_stride"] < 1:
            raise ConfigError("[evolution] invalid parameters")
        try:
            p["psd_params"] = spectral.WelchParams(s, om)
        except ValueError as exc:
            raise ConfigError(f"[evolution] {exc}") from None
        if p["psd_params"].segment_length > p["psd_window"]:
            raise ConfigError("[evolution] psd_segment_length > psd_window")
        return p

    def spatial_params(self):
        p = {
            "k_min": self.get_int("spatial", "k_min", default=1),
            "k_max": self.get_int("spatial", "k_max", default=10),
            "seed": self.get_int("spatial", "seed", default=0),
            "restarts": self.get_int("spatial", "restarts", default=10),
        }
        if p["k_max"] - p["k_min"] < 2 or p["k_min"] < 1 or p["restarts"] < 1:
            raise ConfigError("[spatial] need k_min >= 1 and k_max >= k_min + 2")
        return p

    def synth_spec(self):
        n = self.get_int("synth", "n", required=True)
        t_len = self.get_int("synth", "T", required=True)
        template = self.get_str("synth", "template", default="annual_pulse",
                                choices=synth.TEMPLATES)
        noise = self.get_float("synth", "noise_std", default=0.0)
        seed = self.get_int("synth", "seed", default=0)
        period = self.get_float("synth", "period", default=365.0)
        offsets_raw = self.get_str("synth", "offsets", default="")
        if offsets_raw == "random":
            frac = self.get_float("synth", "zero_fraction", default=0.3)
            offsets = synth.sample_offsets(n, seed, zero_fraction=frac)
        elif offsets_raw:
            offsets = self.get_list("synth", "offsets", int)
        else:
            offsets = ()
        try:
            return synth.SynthSpec(n=n, T=t_len, template=template,
                                   offsets=offsets, noise_std=noise,
                                   seed=seed, period=period)
        except ValueError as exc:
            raise ConfigError(f"[synth] {exc}") from None


# ---------------------------------------------------------------------------
# Output writers

def _write_matrix_csv(path, header, matrix):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in matrix:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_rows_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(str(c) for c in row) + "\n")


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_affinity(outdir, affinity):
    _write_matrix_csv(outdir / "affinity.csv", affinity.station_ids,
                      affinity.values)
    _write_json(outdir / "affinity_norm.json",
                {"domain": affinity.domain_tag, "nu": affinity.norm})


def _write_dendrogram(outdir, dendrogram):
    rows = [(step, a, b, _fmt(h), size)
            for step, (a, b, h, size) in enumerate(dendrogram.merges)]
    _write_rows_csv(outdir / "dendrogram.csv",
                    ["step", "cluster_a", "cluster_b", "height", "size"], rows)


def _write_eigen(outdir, series, station_ids):
    _write_rows_csv(outdir / "lambda1.csv", ["t", "lambda1_norm"],
                    [(int(t), _fmt(v))
                     for t, v in zip(series.times, series.lambda1_norm)])
    _write_matrix_csv(outdir / "eigvec1.csv", ("t",) + tuple(station_ids),
                      [[t] + list(row)
                       for t, row in zip(series.times, series.eigvec1_abs)])
    _write_json(outdir / "coeff_variance.json",
                {"coeff_variance": series.coeff_variance})


def _write_spectrogram(outdir, spectrogram):
    rows = []
    for start, row in zip(spectrogram.window_starts, spectrogram.values):
        for f, p in zip(spectrogram.frequencies, row):
            rows.append((int(start), _fmt(f), _fmt(p)))
    _write_rows_csv(outdir / "spectrogram.csv",
                    ["window_start", "frequency", "power"], rows)


# ---------------------------------------------------------------------------
# Subcommand bodies

def _load(cfg, threads):
    return load_collection(cfg.data_path(), cfg.ingest_config(), threads=threads)


def _run_temporal(cfg, collection, outdir):
    linkage = cfg.get_str("temporal", "linkage", default="average",
                          choices=temporal.LINKAGES)
    traj = temporal.normalize_l1(collection)
    dist = temporal.temporal_distance(traj)
    aff = temporal.to_affinity(dist, "temporal", collection.station_ids)
    dend = temporal.hierarchical_cluster(aff, linkage=linkage)
    _write_affinity(outdir, aff)
    _write_dendrogram(outdir, dend)
    return aff


def _run_spectral(cfg, collection, outdir, params=None):
    from .ingest import detrend
    if params is None:
        params = cfg.welch_params()
    if params.segment_length > collection.T:
        raise ConfigError("[welch] segment_length exceeds series length")
    linkage = cfg.get_str("temporal", "linkage", default="average",
                          choices=temporal.LINKAGES)
    spectra_dir = outdir / "spectra"
    spectra_dir.mkdir(exist_ok=True)
    for s in collection.stations:
        spec = spectral.welch_psd(detrend(s.flow), params)
        _write_rows_csv(spectra_dir / f"{s.meta.station_id}.csv",
                        ["frequency", "power"],
                        [(_fmt(f), _fmt(p))
                         for f, p in zip(spec.frequencies, spec.values)])
    aff = spectral.spectral_affinity(collection, params)
    dend = temporal.hierarchical_cluster(aff, linkage=linkage)
    _write_affinity(outdir, aff)
    _write_dendrogram(outdir, dend)
    return aff


def _run_optimize(cfg, collection, outdir):
    s_grid, omega_grid = cfg.welch_grid()
    if max(s_grid) > collection.T:
        raise ConfigError("[welch] s_grid exceeds series length")
    params, report = spectral.optimize_welch_params(collection, s_grid,
                                                    omega_grid)
    _write_json(outdir / "welch_optimization.json", report)
    return params


def _run_align(cfg, collection, outdir):
    p = cfg.alignment_params()
    process = align_mod.estimate_governing_process(
        collection, max_iters=p["max_iters"], tol=p["tol"],
        max_offset=p["max_offset"], normalized=p["normalized"])
    _write_rows_csv(outdir / "governing.csv", ["t", "g"],
                    [(t + 1, _fmt(v)) for t, v in enumerate(process.g)])
    _write_rows_csv(outdir / "offsets.csv", ["station_id", "phi"],
                    [(sid, int(phi)) for sid, phi
                     in zip(collection.station_ids, process.offsets)])
    _write_rows_csv(outdir / "loss_history.csv", ["iteration", "loss"],
                    [(i + 1, _fmt(v))
                     for i, v in enumerate(process.loss_history)])
    summary = align_mod.summarize_offsets(process, collection)
    _write_rows_csv(
        outdir / "offsets_by_state.csv",
        ["state", "n_nonzero", "percent_nonzero", "median_nonzero"],
        [(state, st.n_nonzero, _fmt(st.percent_nonzero),
          "" if st.median_nonzero is None else _fmt(st.median_nonzero))
         for state, st in summary.items()])
    return process


def _run_evolve(cfg, collection, outdir, process=None):
    p = cfg.evolution_params()
    if p["window"] > collection.T:
        raise ConfigError("[evolution] window exceeds series length")
    if p["psd_window"] > collection.T:
        raise ConfigError("[evolution] psd_window exceeds series length")
    if process is None:
        ap = cfg.alignment_params()
        process = align_mod.estimate_governing_process(
            collection, max_iters=ap["max_iters"], tol=ap["tol"],
            max_offset=ap["max_offset"], normalized=ap["normalized"])

    initial_dir = outdir / "initial"
    aligned_dir = outdir / "aligned"
    initial_dir.mkdir(exist_ok=True)
    aligned_dir.mkdir(exist_ok=True)

    series = evolution.rolling_eigen_series(collection, p["window"], p["stride"])
    _write_eigen(initial_dir, series, collection.station_ids)
    initial_g = collection.matrix().mean(axis=0)
    _write_spectrogram(initial_dir, evolution.rolling_psd(
        initial_g, p["psd_window"], p["psd_stride"], p["psd_params"]))

    aligned = evolution.aligned_view(collection, process.offsets)
    aseries = evolution.rolling_eigen_series(aligned, p["window"], p["stride"])
    _write_eigen(aligned_dir, aseries, aligned.station_ids)
    _write_spectrogram(aligned_dir, evolution.rolling_psd(
        process.g[: aligned.T], p["psd_window"], p["psd_stride"],
        p["psd_params"]))


def _run_spatial(cfg, collection, outdir):
    p = cfg.spatial_params()
    if p["k_max"] > collection.n:
        raise ConfigError("[spatial] k_max exceeds station count")
    points = np.array([[s.meta.latitude, s.meta.longitude]
                       for s in collection.stations])
    dist = spatial.geodesic_distance_matrix(points)
    _write_matrix_csv(outdir / "geo_distances.csv", collection.station_ids, dist)
    k, curve = spatial.elbow_select(points, range(p["k_min"], p["k_max"] + 1),
                                    seed=p["seed"], restarts=p["restarts"])
    _write_rows_csv(outdir / "elbow.csv", ["k", "inertia"],
                    [(kk, _fmt(v)) for kk, v in curve])
    result = spatial.best_of_restarts(points, k, seed=p["seed"],
                                      restarts=p["restarts"])
    _write_rows_csv(outdir / "clusters.csv",
                    ["station_id", "label", "lat", "lon"],
                    [(s.meta.station_id, int(lab), _fmt(s.meta.latitude),
                      _fmt(s.meta.longitude))
                     for s, lab in zip(collection.stations, result.labels)])


def _run_synth(cfg, outdir):
    spec = cfg.synth_spec()
    synth.write_synthetic(spec, outdir / "dataset")


def run(subcommand, cfg, outdir, threads=None):
    """Execute one subcommand; returns the output directory."""
    outdir = Path(outdir)
    started = time.time()
    outdir.mkdir(parents=True, exist_ok=True)

    if subcommand == "synth":
        _run_synth(cfg, outdir)
    else:
        collection = _load(cfg, threads)
        if subcommand == "ingest-check":
            _write_json(outdir / "ingest_check.json",
                        {"n": collection.n, "T": collection.T,
                         "start_date": collection.start_date.isoformat(),
                         "station_ids": list(collection.station_ids)})
        elif subcommand == "temporal":
            sub = outdir / "temporal"
            sub.mkdir(exist_ok=True)
            _run_temporal(cfg, collection, sub)
        elif subcommand == "spectral":
            sub = outdir / "spectral"
            sub.mkdir(exist_ok=True)
            _run_spectral(cfg, collection, sub)
        elif subcommand == "optimize-welch":
            sub = outdir / "optimize_welch"
            sub.mkdir(exist_ok=True)
            _run_optimize(cfg, collection, sub)
        elif subcommand == "align":
            sub = outdir / "align"
            sub.mkdir(exist_ok=True)
            _run_align(cfg, collection, sub)
        elif subcommand == "evolve":
            sub = outdir / "evolve"
            sub.mkdir(exist_ok=True)
            _run_evolve(cfg, collection, sub)
        elif subcommand == "spatial":
            sub = outdir / "spatial"
            sub.mkdir(exist_ok=True)
            _run_spatial(cfg, collection, sub)
        elif subcommand == "all":
            for name in ("temporal", "spectral", "optimize_welch", "align",
                         "evolve", "spatial"):
                (outdir / name).mkdir(exist_ok=True)
            _run_temporal(cfg, collection, outdir / "temporal")
            params = _run_optimize(cfg, collection, outdir / "optimize_welch")
            _run_spectral(cfg, collection, outdir / "spectral", params=params)
            process = _run_align(cfg, collection, outdir / "align")
            _run_evolve(cfg, collection, outdir / "evolve", process=process)
            _run_spatial(cfg, collection, outdir / "spatial")
        else:
            raise ConfigError(f"unknown subcommand {subcommand!r}")

    manifest = {
        "subcommand": subcommand,
        "config_sha256": cfg.sha256(),
        "version": __version__,
        "threads": threads,
        "wall_time_s": time.time() - started,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    _write_json(outdir / "manifest.json", manifest)
    return outdir


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="streamgov",
        description="Temporal, spectral and spatial streamflow analysis toolkit.")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", required=True, help="INI config file")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--threads", type=int, default=None,
                        help="thread count for parallel file parsing")
    args = parser.parse_args(argv)

    try:
        cfg = RunConfig(args.config)
        run(args.subcommand, cfg, args.out, threads=args.threads)
    except ConfigError as exc:
        print(f"streamgov: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"streamgov: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (InvariantError, AssertionError) as exc:
        print(f"streamgov: internal invariant violation: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except ValueError as exc:
        print(f"streamgov: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return 0


if __name__ == "__main__":
    sys.exit(main())
