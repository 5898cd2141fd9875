import json

import numpy as np
import pytest

from pnsreg.evaluation import SimulationConfig, simulate_dataset
from pnsreg.io import (
    FORMAT_VERSION,
    DataError,
    ModelFile,
    ModelFileError,
    read_model,
    read_table,
    write_csv,
    write_model,
)
from pnsreg.regress import design_matrix, fit_compositional_regression, predict_composition


def write_text(path, text):
    path.write_text(text, encoding="utf-8")
    return path


class TestReadTable:
    def test_closes_rows(self, tmp_path):
        f = write_text(tmp_path / "d.csv", "a,b,c,x\n2,2,4,0.5\n1,1,1,1.5\n")
        tab = read_table(f, ["a", "b", "c"], ["x"])
        np.testing.assert_allclose(tab.responses, [[0.25, 0.25, 0.5], [1 / 3, 1 / 3, 1 / 3]])
        np.testing.assert_array_equal(tab.predictors, [[0.5], [1.5]])
        assert tab.dropped == 0

    def test_negative_part_names_cell(self, tmp_path):
        f = write_text(tmp_path / "d.csv", "a,b,c\n1,2,3\n1,-2,3\n")
        with pytest.raises(DataError, match=r"row 3, column 'b'"):
            read_table(f, ["a", "b", "c"])

    def test_blank_predictor_dropped(self, tmp_path):
        f = write_text(tmp_path / "d.csv", "a,b,c,x\n1,2,3,0.1\n1,2,3,\n3,2,1,0.3\n")
        tab = read_table(f, ["a", "b", "c"], ["x"])
        assert tab.dropped == 1 and tab.responses.shape == (2, 3)

    def test_unparseable_cell(self, tmp_path):
        f = write_text(tmp_path / "d.csv", "a,b\n1,abc\n")
        with pytest.raises(DataError, match="abc"):
            read_table(f, ["a", "b"])

    def test_missing_column(self, tmp_path):
        f = write_text(tmp_path / "d.csv", "a,b\n1,2\n")
        with pytest.raises(DataError, match="c"):
            read_table(f, ["a", "b", "c"])

    def test_all_zero_row(self, tmp_path):
        f = write_text(tmp_path / "d.csv", "a,b\n0,0\n")
        with pytest.raises(DataError):
            read_table(f, ["a", "b"])

    def test_empty_file(self, tmp_path):
        with pytest.raises(DataError):
            read_table(write_text(tmp_path / "d.csv", ""), ["a"])

    def test_header_only(self, tmp_path):
        tab = read_table(write_text(tmp_path / "d.csv", "a,b,x\n"), ["a", "b"], ["x"])
        assert tab.responses.shape == (0, 2) and tab.predictors.shape == (0, 1)

    def test_write_csv_full_precision(self, tmp_path):
        v = 0.1 + 0.2
        write_csv(tmp_path / "o.csv", ["v"], [[v]])
        assert float((tmp_path / "o.csv").read_text().splitlines()[1]) == v


@pytest.fixture(scope="module")
def fitted():
    x, Y = simulate_dataset(SimulationConfig(seed=1))
    model = fit_compositional_regression(Y, x)
    return model, ModelFile(model.pns, model, ["p1", "p2", "p3", "p4", "p5"], ["x1", "x2"],
                            {"seed": 1, "selection": "bic"})


class TestModelFile:
    def test_round_trip_bit_identical(self, fitted, tmp_path):
        model, mf = fitted
        write_model(mf, tmp_path / "m.json")
        back = read_model(tmp_path / "m.json")
        probe = design_matrix(np.random.default_rng(0).normal(size=(25, 2)))
        np.testing.assert_array_equal(predict_composition(back.regression, probe),
                                      predict_composition(model, probe))
        for a, b in zip(back.pns.levels, model.pns.levels):
            np.testing.assert_array_equal(a.axis, b.axis)
            assert a.angle == b.angle and a.kind is b.kind
        assert back.pns.mean_angle == model.pns.mean_angle
        np.testing.assert_array_equal(back.regression.beta_circular, model.beta_circular)
        np.testing.assert_array_equal(back.regression.B_linear, model.B_linear)
        assert back.response_cols == mf.response_cols
        assert back.provenance["seed"] == 1 and "fit_timestamp" in back.provenance

    def test_document_fields(self, fitted, tmp_path):
        _, mf = fitted
        write_model(mf, tmp_path / "m.json")
        doc = json.loads((tmp_path / "m.json").read_text())
        assert doc["format_version"] == FORMAT_VERSION
        assert doc["alpha"] == 0.5
        assert len(doc["pns"]["levels"]) == 3
        assert len(doc["pns"]["score_scales"]) == 4

    def test_truncated(self, fitted, tmp_path):
        _, mf = fitted
        write_model(mf, tmp_path / "m.json")
        text = (tmp_path / "m.json").read_text()
        (tmp_path / "t.json").write_text(text[: len(text) // 2])
        with pytest.raises(ModelFileError):
            read_model(tmp_path / "t.json")

    def test_older_minor_version(self, fitted, tmp_path):
        _, mf = fitted
        write_model(mf, tmp_path / "m.json")
        doc = json.loads((tmp_path / "m.json").read_text())
        doc["format_version"] = "1.0"
        for key in ("level_stats", "anchor", "selection"):
            del doc["pns"][key]
        for key in ("residual_variances", "circular_link", "kappa", "converged"):
            del doc["regression"][key]
        del doc["provenance"]
        (tmp_path / "old.json").write_text(json.dumps(doc))
        back = read_model(tmp_path / "old.json")
        assert back.regression.circular_link == "ls"
        assert back.pns.anchor is None and back.provenance == {}
        probe = design_matrix(np.zeros((1, 2)))
        np.testing.assert_array_equal(predict_composition(back.regression, probe),
                                      predict_composition(mf.regression, probe))

    def test_unknown_major_version(self, fitted, tmp_path):
        _, mf = fitted
        write_model(mf, tmp_path / "m.json")
        doc = json.loads((tmp_path / "m.json").read_text())
        doc["format_version"] = "2.0"
        (tmp_path / "new.json").write_text(json.dumps(doc))
        with pytest.raises(ModelFileError, match="2.0"):
            read_model(tmp_path / "new.json")

    def test_missing_required_field(self, fitted, tmp_path):
        _, mf = fitted
        write_model(mf, tmp_path / "m.json")
        doc = json.loads((tmp_path / "m.json").read_text())
        del doc["pns"]["levels"]
        (tmp_path / "bad.json").write_text(json.dumps(doc))
        with pytest.raises(ModelFileError):
            read_model(tmp_path / "bad.json")

    def test_atomic_write_leaves_no_temp(self, fitted, tmp_path):
        _, mf = fitted
        write_model(mf, tmp_path / "m.json")
        write_model(mf, tmp_path / "m.json")
        assert sorted(p.name for p in tmp_path.iterdir()) == ["m.json"]

    def test_pinned_timestamp(self, fitted, tmp_path, monkeypatch):
        _, mf = fitted
        monkeypatch.setenv("SOURCE_DATE_EPOCH", "0")
        write_model(mf, tmp_path / "a.json")
        write_model(mf, tmp_path / "b.json")
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
        assert read_model(tmp_path / "a.json").provenance["fit_timestamp"].startswith("1970")
