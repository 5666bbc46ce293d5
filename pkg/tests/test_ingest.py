import numpy as np
import pytest
from datetime import date

from streamgov.ingest import (
    Collection, DataError, IngestConfig, StationMeta, StationSeries,
    detrend, fill_gaps, load_collection, write_collection,
)


def write_dataset(root, stations, start=date(2000, 1, 1)):
    """stations: dict station_id -> (meta row suffix, list of flow strings)."""
    lines = ["station_id,name,latitude,longitude,state"]
    for sid, (meta, _) in stations.items():
        lines.append(f"{sid},{meta[0]},{meta[1]},{meta[2]},{meta[3]}")
    (root / "metadata.csv").write_text("\n".join(lines) + "\n")
    for sid, (_, flows) in stations.items():
        rows = ["date,flow"]
        d = start
        for v in flows:
            rows.append(f"{d.isoformat()},{v}")
            d = date.fromordinal(d.toordinal() + 1)
        (root / f"{sid}.csv").write_text("\n".join(rows) + "\n")


def toy_stations(n=3, days=10):
    return {
        f"A{i:02d}": ((f"name {i}", -30.0 - i, 140.0 + i, "NSW"),
                      [str(float(j + i)) for j in range(days)])
        for i in range(n)
    }


def config(days=10, policy="reject"):
    return IngestConfig(date(2000, 1, 1),
                        date.fromordinal(date(2000, 1, 1).toordinal() + days - 1),
                        policy)


class TestLoadCollection:
    def test_three_valid_stations(self, tmp_path):
        write_dataset(tmp_path, toy_stations())
        coll = load_collection(tmp_path, config())
        assert coll.n == 3
        assert coll.T == 10
        assert coll.station_ids == ["A00", "A01", "A02"]

    def test_negative_flow_names_station_and_line(self, tmp_path):
        stations = toy_stations()
        stations["A01"][1][4] = "-4.0"
        write_dataset(tmp_path, stations)
        with pytest.raises(DataError, match=r"A01.*row 6.*negative"):
            load_collection(tmp_path, config())

    def test_non_numeric_flow(self, tmp_path):
        stations = toy_stations()
        stations["A02"][1][0] = "abc"
        write_dataset(tmp_path, stations)
        with pytest.raises(DataError, match=r"A02.*non-numeric"):
            load_collection(tmp_path, config())

    def test_date_range_mismatch(self, tmp_path):
        write_dataset(tmp_path, toy_stations(days=9))
        with pytest.raises(DataError, match="expected 10"):
            load_collection(tmp_path, config())

    def test_missing_metadata_for_flow_file(self, tmp_path):
        write_dataset(tmp_path, toy_stations())
        (tmp_path / "ZZZ.csv").write_text("date,flow\n2000-01-01,1.0\n")
        with pytest.raises(DataError, match="ZZZ"):
            load_collection(tmp_path, config())

    def test_missing_flow_file(self, tmp_path):
        write_dataset(tmp_path, toy_stations())
        (tmp_path / "A01.csv").unlink()
        with pytest.raises(DataError, match="A01"):
            load_collection(tmp_path, config())

    def test_order_ascending_by_id(self, tmp_path):
        stations = dict(reversed(list(toy_stations(4).items())))
        write_dataset(tmp_path, stations)
        coll = load_collection(tmp_path, config())
        assert coll.station_ids == sorted(coll.station_ids)
        # identical result with threaded parsing
        coll2 = load_collection(tmp_path, config(), threads=4)
        assert coll2.station_ids == coll.station_ids
        assert np.array_equal(coll2.matrix(), coll.matrix())

    def test_round_trip_identity(self, tmp_path):
        write_dataset(tmp_path, toy_stations())
        coll = load_collection(tmp_path, config())
        out = tmp_path / "copy"
        write_collection(coll, out)
        coll2 = load_collection(out, config())
        assert coll2.station_ids == coll.station_ids
        assert np.array_equal(coll2.matrix(), coll.matrix())
        assert [s.meta for s in coll2.stations] == [s.meta for s in coll.stations]


class TestGaps:
    def station(self, flows):
        meta = StationMeta("G00", "gappy", -30.0, 140.0, "VIC")
        return StationSeries(meta, np.asarray(flows, dtype=float), date(2000, 1, 1))

    def test_linear_midpoint(self):
        out = fill_gaps(np.array([1.0, np.nan, 3.0]), "linear")
        assert np.array_equal(out, [1.0, 2.0, 3.0])

    def test_boundary_gap_rejected(self):
        with pytest.raises(DataError, match="boundary"):
            fill_gaps(np.array([np.nan, 2.0, 3.0]), "linear")

    def test_reject_policy(self):
        with pytest.raises(DataError, match="gap"):
            fill_gaps(np.array([1.0, np.nan, 3.0]), "reject")

    def test_loader_linear_fill(self, tmp_path):
        stations = toy_stations(2, days=5)
        stations["A00"][1][2] = "NA"
        write_dataset(tmp_path, stations)
        coll = load_collection(tmp_path, config(days=5, policy="linear"))
        assert coll.stations[0].flow[2] == pytest.approx(
            (coll.stations[0].flow[1] + coll.stations[0].flow[3]) / 2)

    def test_loader_reject_gap(self, tmp_path):
        stations = toy_stations(2, days=5)
        stations["A00"][1][2] = "NA"
        write_dataset(tmp_path, stations)
        with pytest.raises(DataError, match=r"A00.*gap"):
            load_collection(tmp_path, config(days=5, policy="reject"))

    def test_loader_boundary_gap(self, tmp_path):
        stations = toy_stations(2, days=5)
        stations["A00"][1][0] = "NA"
        write_dataset(tmp_path, stations)
        with pytest.raises(DataError, match="boundary"):
            load_collection(tmp_path, config(days=5, policy="linear"))

    def test_loader_long_gap(self, tmp_path):
        stations = toy_stations(2, days=12)
        for j in range(2, 10):
            stations["A00"][1][j] = "NA"
        write_dataset(tmp_path, stations)
        with pytest.raises(DataError, match="exceeds limit"):
            load_collection(tmp_path, config(days=12, policy="linear"))

    def test_fill_gaps_no_gap_identity(self):
        s = self.station([1.0, 2.0, 3.0])
        out = fill_gaps(s, "reject")
        assert np.array_equal(out.flow, s.flow)


class TestDetrend:
    def test_symmetric(self):
        assert np.array_equal(detrend([1.0, 2.0, 3.0]), [-1.0, 0.0, 1.0])

    def test_constant(self):
        assert np.array_equal(detrend([5.0, 5.0]), [0.0, 0.0])

    def test_hand_arithmetic(self):
        # mean of [2, 4, 9] is 5
        assert np.array_equal(detrend([2.0, 4.0, 9.0]), [-3.0, -1.0, 4.0])

    def test_zero_mean(self):
        rng = np.random.default_rng(0)
        x = rng.uniform(0, 1e6, size=1000)
        out = detrend(x)
        assert abs(out.mean()) <= 1e-9 * np.abs(x).max()

    def test_idempotent(self):
        rng = np.random.default_rng(1)
        x = rng.uniform(0, 100, size=500)
        once = detrend(x)
        assert np.allclose(detrend(once), once, atol=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            detrend([])


class TestValidation:
    def test_latitude_bounds(self):
        with pytest.raises(DataError, match="latitude"):
            StationMeta("X", "x", -95.0, 140.0, "NSW")

    def test_unknown_state(self):
        with pytest.raises(DataError, match="state"):
            StationMeta("X", "x", -30.0, 140.0, "XYZ")

    def test_duplicate_ids_rejected(self):
        meta = StationMeta("X", "x", -30.0, 140.0, "NSW")
        s = StationSeries(meta, np.ones(5), date(2000, 1, 1))
        with pytest.raises(DataError, match="duplicate"):
            Collection((s, s), 5, date(2000, 1, 1))

    def test_min_two_stations(self):
        meta = StationMeta("X", "x", -30.0, 140.0, "NSW")
        s = StationSeries(meta, np.ones(5), date(2000, 1, 1))
        with pytest.raises(DataError, match="at least 2"):
            Collection((s,), 5, date(2000, 1, 1))
