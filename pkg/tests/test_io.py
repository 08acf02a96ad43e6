import numpy as np
import pytest

from stfnn.errors import IngestionError
from stfnn.fda import SpatialDataset, TimeGrid
from stfnn.io import DatasetManifest, ingest, load_model, read_samples, save_model, write_dataset
from stfnn.models import EstimatorSpec, fit
from stfnn.simgen import SimConfig, simulate


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def _manifest(tmp_path, curves, locations="sample_id,coord_1\na,0\nb,1\n", responses="sample_id,y\na,1\nb,2\n", **extra):
    _write(tmp_path / "curves.csv", curves)
    _write(tmp_path / "locations.csv", locations)
    _write(tmp_path / "responses.csv", responses)
    m = {"curves": "curves.csv", "locations": "locations.csv", "responses": "responses.csv"}
    m.update(extra)
    return DatasetManifest.from_dict(m, base=tmp_path)


GOOD = "sample_id,feature_id,time,value\na,x,0,1\na,x,1,2\nb,x,1,5\nb,x,0,3\n"


class TestRoundTrip:
    def test_export_ingest_equal(self, tmp_path):
        ds = simulate(SimConfig(P=3, Q=4, seed=1, n_grid=31))
        path = write_dataset(ds, tmp_path)
        back = ingest(path)
        assert back == ds

    def test_multi_feature_three_dims(self, tmp_path, rng):
        g1, g2 = TimeGrid.uniform(0, 1, 5), TimeGrid.uniform(0, 2, 7)
        ds = SpatialDataset.from_arrays(
            [g1, g2], [rng.normal(size=(4, 5)), rng.normal(size=(4, 7))], rng.normal(size=4), rng.normal(size=(4, 3)), ids=("s1", "s2", "s3", "s4")
        )
        back = ingest(write_dataset(ds, tmp_path, ["temp", "rain"]))
        assert back == ds


class TestIngestion:
    def test_unsorted_rows(self, tmp_path):
        ds = ingest(_manifest(tmp_path, GOOD))
        assert np.array_equal(ds.curves(0), [[1, 2], [3, 5]])
        assert ds.ids == ("a", "b")

    def test_resampling_matches_interpolation(self, tmp_path):
        t = np.linspace(0, 1, 21)
        rows = ["sample_id,feature_id,time,value"]
        vals = {"a": np.sin(3 * t), "b": t**2}
        for sid, v in vals.items():
            rows += [f"{sid},x,{float(ti)!r},{float(vi)!r}" for ti, vi in zip(t, v)]
        ds = ingest(_manifest(tmp_path, "\n".join(rows) + "\n", n_grid=7, lower=0, upper=1))
        grid = np.linspace(0, 1, 7)
        assert np.allclose(ds.curves(0)[0], np.interp(grid, t, vals["a"]))
        assert np.allclose(ds.curves(0)[1], np.interp(grid, t, vals["b"]))

    def test_irregular_without_grid_rejected(self, tmp_path):
        bad = "sample_id,feature_id,time,value\na,x,0,1\na,x,1,2\nb,x,0,3\nb,x,0.5,5\n"
        with pytest.raises(IngestionError, match="n_grid"):
            ingest(_manifest(tmp_path, bad))

    @pytest.mark.parametrize(
        "curves,match",
        [
            (GOOD + "a,x,1,9\n", r"curves.csv:6: duplicate"),
            ("sample_id,feature_id,time,value\na,x,0,nan\na,x,1,2\nb,x,0,1\nb,x,1,1\n", r"curves.csv:2: value is not finite"),
            ("sample_id,feature_id,time,value\na,x,0,abc\n", r"curves.csv:2: value 'abc' is not a number"),
            ("id,feature,time,value\n", r"curves.csv:1: expected header"),
            ("sample_id,feature_id,time,value\na,x,0\n", r"curves.csv:2: expected 4 fields"),
            ("sample_id,feature_id,time,value\na,x,0,1\na,x,1,1\n", r"no curves for sample_id 'b'"),
        ],
    )
    def test_curve_errors(self, tmp_path, curves, match):
        with pytest.raises(IngestionError, match=match):
            ingest(_manifest(tmp_path, curves))

    def test_missing_response(self, tmp_path):
        with pytest.raises(IngestionError, match="no response for sample_id 'b'"):
            ingest(_manifest(tmp_path, GOOD, responses="sample_id,y\na,1\n"))

    def test_duplicate_location(self, tmp_path):
        with pytest.raises(IngestionError, match="locations.csv:3: duplicate"):
            ingest(_manifest(tmp_path, GOOD, locations="sample_id,coord_1\na,0\na,1\nb,2\n"))

    def test_orphan_curves(self, tmp_path):
        with pytest.raises(IngestionError, match="no location"):
            ingest(_manifest(tmp_path, GOOD + "c,x,0,1\nc,x,1,1\n"))

    def test_times_outside_interval(self, tmp_path):
        with pytest.raises(IngestionError, match="outside"):
            ingest(_manifest(tmp_path, GOOD, lower=0.5, upper=1, n_grid=5))

    def test_dimension_check(self, tmp_path):
        with pytest.raises(IngestionError, match="coordinates"):
            ingest(_manifest(tmp_path, GOOD, dim=2))

    def test_missing_file(self, tmp_path):
        with pytest.raises(IngestionError):
            ingest(DatasetManifest.from_dict({"curves": "nope.csv", "locations": "x.csv"}, base=tmp_path))

    def test_manifest_requires_keys(self):
        with pytest.raises(IngestionError):
            DatasetManifest.from_dict({"curves": "c.csv"})

    def test_integer_ids_converted(self, tmp_path):
        ds = simulate(SimConfig(P=2, Q=2, n_grid=5))
        assert ingest(write_dataset(ds, tmp_path)).ids == (1, 2, 3, 4)


class TestModelFiles:
    def test_save_load_lossless(self, tmp_path, small_sim1):
        m = fit(small_sim1, EstimatorSpec("SARFLM", family="Gaussian", bandwidth=1.3))
        save_model(m, tmp_path / "m.json", ["x1"])
        back, feats = load_model(tmp_path / "m.json")
        assert feats == ["x1"]
        assert back.to_dict() == m.to_dict()

    def test_not_a_model(self, tmp_path):
        (tmp_path / "m.json").write_text("{]")
        with pytest.raises(IngestionError):
            load_model(tmp_path / "m.json")

    def test_read_samples_resamples_to_model_grid(self, tmp_path, small_sim1):
        write_dataset(small_sim1, tmp_path)
        grid = TimeGrid.uniform(0, 10, 11)
        ids, samples, locs = read_samples(tmp_path / "curves.csv", tmp_path / "locations.csv", [grid], ["x1"])
        assert len(samples) == len(small_sim1) and samples[0].grids[0] == grid
        assert np.allclose(samples[0].values[0], np.interp(grid.points, small_sim1.grid(0).points, small_sim1.curves(0)[0]))
