"""Shared fixtures plus a summary line per acceptance criterion."""
import numpy as np
import pytest

from streamgov.ingest import Collection, StationMeta, StationSeries
from datetime import date

_acceptance_results = {}


def pytest_runtest_logreport(report):
    if "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "call":
        _acceptance_results[name] = report.outcome
    elif report.when == "setup" and report.outcome == "skipped":
        _acceptance_results[name] = "skipped"


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name in sorted(_acceptance_results):
        outcome = _acceptance_results[name]
        label = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}.get(
            outcome, outcome.upper())
        terminalreporter.write_line(f"{label}  {name}")


def make_collection(rows, states=None, start=date(2000, 1, 1)):
    """Collection from a (n, T) array, synthetic metadata."""
    rows = np.asarray(rows, dtype=np.float64)
    n = rows.shape[0]
    if states is None:
        states = ["NSW"] * n
    stations = []
    for i in range(n):
        meta = StationMeta(f"S{i:03d}", f"station {i}",
                           -35.0 + 0.1 * i, 145.0 + 0.1 * i, states[i])
        stations.append(StationSeries(meta, rows[i], start))
    return Collection(tuple(stations), rows.shape[1], start)


@pytest.fixture
def collection_factory():
    return make_collection
