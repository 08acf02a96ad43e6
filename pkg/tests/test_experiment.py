import json

import pytest

from stfnn.errors import IngestionError, ValidationError
from stfnn.experiment import (
    RESULTS_HEADER,
    TABLE1,
    ExperimentConfig,
    ExperimentError,
    ResultRow,
    format_bandwidths,
    format_table,
    merge_results,
    read_results,
    run_experiment,
    write_results,
)
from stfnn.metrics import improvement

SMALL = {
    "scenario": "sim1",
    "seed": 3,
    "simulation": {"P": 3, "Q": 4, "n_grid": 51},
    "cv": {"k": 3},
    "estimators": ["FLM", "FNN", "GWFLM_Gaussian"],
    "network": {"n_functional": 2, "hidden": [2]},
    "train": {"max_iter": 60},
    "bandwidths": {"GWFLM_Gaussian": 2.0},
}


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    return out, run_experiment(dict(SMALL), out_dir=out)


class TestConfig:
    def test_defaults_table1(self):
        cfg = ExperimentConfig.from_dict({"scenario": "sim1"})
        assert cfg.estimators == TABLE1 and len(cfg.estimators) == 12
        specs = [cfg.estimator_spec(n) for n in cfg.estimators]
        assert len({s.name for s in specs}) == 12
        assert cfg.k == 10 and cfg.train.seed == 0

    def test_train_seed_follows_seed(self):
        assert ExperimentConfig.from_dict({"scenario": "sim1", "seed": 7}).train.seed == 7
        assert ExperimentConfig.from_dict({"scenario": "sim1", "seed": 7, "train": {"seed": 2}}).train.seed == 2

    def test_loo(self):
        assert ExperimentConfig.from_dict({"scenario": "sim1", "cv": {"k": "loo"}}).k is None

    @pytest.mark.parametrize(
        "raw",
        [
            {},
            {"scenario": "sim1", "bogus": 1},
            {"scenario": "sim1", "cv": {"k": "ten"}},
            {"scenario": "sim1", "estimators": ["NOPE"]},
            {"scenario": "sim1", "estimators": []},
            {"scenario": "sim1", "simulation": {"R": 3}},
            {"scenario": "sim1", "train": {"speed": 3}},
            {"scenario": "sim1", "network": {"hidden": [0]}},
        ],
    )
    def test_rejects(self, raw):
        with pytest.raises(ValidationError):
            ExperimentConfig.from_dict(raw)

    def test_estimator_spec_overrides(self):
        cfg = ExperimentConfig.from_dict(
            {"scenario": "sim1", "bandwidths": {"GWFNN_Gaussian": 3}, "bandwidth_grids": {"Exponential": [1, 2]}, "network": {"hidden": [8, 4]}}
        )
        s = cfg.estimator_spec("GWFNN_Gaussian")
        assert s.bandwidth == 3 and s.network.hidden == (8, 4)
        assert cfg.estimator_spec("GWFLM_Exponential").bandwidth_grid == (1, 2)
        assert cfg.estimator_spec("FLM").network is None

    def test_roundtrip(self):
        cfg = ExperimentConfig.from_dict(dict(SMALL))
        again = ExperimentConfig.from_dict(cfg.to_dict())
        assert again.to_dict() == cfg.to_dict()


class TestRun:
    def test_shape(self, small_run):
        out, res = small_run
        rows = read_results(out / "results.csv")
        assert [r.estimator for r in rows] == ["FLM", "FNN", "GWFLM"]
        assert rows[2].kernel == "Gaussian" and rows[2].bandwidth == "2.0|2.0|2.0"
        assert all(r.seed == 3 for r in rows)

    def test_imps_recompute(self, small_run):
        out, res = small_run
        rows = read_results(out / "results.csv")
        by = {r.estimator: r for r in rows}
        for r in rows:
            assert r.imp_vs_flm == improvement(by["FLM"].rmse, r.rmse)
            assert r.imp_vs_fnn == improvement(by["FNN"].rmse, r.rmse)
        assert by["FLM"].imp_vs_flm == 0.0

    def test_log(self, small_run):
        out, res = small_run
        log = json.loads((out / "run_log.json").read_text())
        assert log["n_samples"] == 12 and log["config"]["seed"] == 3
        ests = {e["estimator"]: e for e in log["estimators"]}
        assert ests["GWFLM_Gaussian"]["significance_vs"]["baseline"] == "FLM"
        assert "significance_vs" not in ests["FLM"]
        assert len(ests["FNN"]["predictions"]) == 12

    def test_deterministic(self, small_run, tmp_path):
        out, _ = small_run
        run_experiment(dict(SMALL), out_dir=tmp_path)
        assert (tmp_path / "results.csv").read_bytes() == (out / "results.csv").read_bytes()

    def test_from_file(self, tmp_path):
        import yaml

        cfg = dict(SMALL, estimators=["FLM"], out_dir=str(tmp_path / "o"))
        (tmp_path / "c.yaml").write_text(yaml.safe_dump(cfg))
        res = run_experiment(tmp_path / "c.yaml")
        assert (tmp_path / "o" / "results.csv").exists() and len(res["rows"]) == 1

    def test_stage_named_on_failure(self):
        with pytest.raises(ExperimentError, match="data"):
            run_experiment({"scenario": "/nonexistent/manifest.yaml"})
        with pytest.raises(ExperimentError, match="cross-validation of FLM"):
            run_experiment(dict(SMALL, estimators=["FLM"], cv={"k": 50}))


class TestResultsTable:
    ROWS = [
        ResultRow("FLM", "", "", 1.25, 0.0, 10.0, 1),
        ResultRow("GWFNN", "Gaussian", "1.5|2", 0.1 + 0.2, None, -3.5, None),
    ]

    def test_roundtrip_exact(self, tmp_path):
        write_results(self.ROWS, tmp_path / "r.csv")
        assert read_results(tmp_path / "r.csv") == self.ROWS

    def test_header(self):
        assert write_results([]).strip() == ",".join(RESULTS_HEADER)

    @pytest.mark.parametrize(
        "body,match",
        [
            ("FLM,,,abc,,,1\n", r"r.csv:2: rmse 'abc'"),
            ("FLM,,,,,,1\n", r"r.csv:2: missing rmse"),
            ("FLM,,,1.0,,\n", r"r.csv:2: expected 7 fields"),
            ("FLM,,,1.0,,,x\n", r"r.csv:2: seed"),
            ("FLM,,,inf,,,1\n", r"not finite"),
        ],
    )
    def test_read_errors(self, tmp_path, body, match):
        (tmp_path / "r.csv").write_text(",".join(RESULTS_HEADER) + "\n" + body)
        with pytest.raises(IngestionError, match=match):
            read_results(tmp_path / "r.csv")

    def test_bad_header(self, tmp_path):
        (tmp_path / "r.csv").write_text("a,b\n")
        with pytest.raises(IngestionError, match=":1:"):
            read_results(tmp_path / "r.csv")

    def test_merge(self):
        other = [ResultRow("FLM", "", "", 1.25, 0.0, 10.0, 2)]
        merged = merge_results([self.ROWS, self.ROWS, other])
        assert len(merged) == 3
        clash = [ResultRow("FLM", "", "", 9.0, 0.0, 10.0, 1)]
        with pytest.raises(ValidationError):
            merge_results([self.ROWS, clash])

    def test_format_bandwidths(self):
        assert format_bandwidths([4, 8]) == "4|8"
        assert format_bandwidths([0.1 + 0.2]) == "0.30000000000000004"

    def test_format_table(self):
        text = format_table(self.ROWS)
        assert text.splitlines()[0].split() == ["estimator", "kernel", "rmse", "imp_vs_flm", "imp_vs_fnn", "seed"]
        assert "-3.50%" in text and "1.2500" in text


def test_format_table_pooled_column():
    rows = [ResultRow("FLM", "", "", 1.25, 0.0, None, 1)]
    text = format_table(rows, [1.5])
    assert text.splitlines()[0].split()[3] == "rmse_pooled" and "1.5000" in text
