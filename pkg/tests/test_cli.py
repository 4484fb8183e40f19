import csv
import json

import pytest

from junctionrom.cli import main


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """One generate -> train chain shared by the read-only CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    dataset = root / "dataset"
    models = root / "models"
    assert (
        main(
            [
                "generate",
                "--cohort",
                "pulmonary",
                "--n",
                "8",
                "--seed",
                "7",
                "--oracle-mode",
                "nonideal",
                "--out",
                str(dataset),
            ]
        )
        == 0
    )
    assert (
        main(
            [
                "train",
                "--dataset",
                str(dataset),
                "--kinds",
                "linear,gpr",
                "--split-seed",
                "1",
                "--train-seed",
                "2",
                "--out",
                str(models),
            ]
        )
        == 0
    )
    return root


class TestGenerate:
    def test_manifest_counts_and_fingerprint(self, workspace):
        manifest = json.loads((workspace / "dataset" / "manifest.json").read_text())
        assert manifest["config"]["n_geometries"] == 8
        assert manifest["n_geometries_built"] == 8
        assert manifest["n_records"] == 16
        assert len(manifest["fingerprint"]) == 16

    def test_rerun_reproduces_fingerprint(self, workspace, tmp_path):
        out = tmp_path / "again"
        assert (
            main(
                [
                    "generate",
                    "--cohort",
                    "pulmonary",
                    "--n",
                    "8",
                    "--seed",
                    "7",
                    "--oracle-mode",
                    "nonideal",
                    "--out",
                    str(out),
                ]
            )
            == 0
        )
        a = json.loads((workspace / "dataset" / "manifest.json").read_text())
        b = json.loads((out / "manifest.json").read_text())
        assert a["fingerprint"] == b["fingerprint"]
        assert a == b

    def test_bogus_cohort_exits_2(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            main(["generate", "--cohort", "bogus", "--out", "/tmp/never"])
        assert excinfo.value.code == 2
        assert "invalid choice" in capsys.readouterr().err

    def test_refuses_overwrite_without_force(self, workspace, capsys):
        code = main(
            [
                "generate",
                "--cohort",
                "pulmonary",
                "--n",
                "2",
                "--seed",
                "1",
                "--out",
                str(workspace / "dataset"),
            ]
        )
        assert code == 2
        error = json.loads(capsys.readouterr().err)
        assert error["error"]["type"] == "ConfigurationError"

    def test_custom_cohort_file(self, tmp_path):
        spec_path = tmp_path / "cohort.json"
        spec_path.write_text(
            json.dumps(
                {
                    "name": "narrow",
                    "inlet_radius": [0.3, 0.32],
                    "radius_ratio": [0.6, 0.7],
                    "outlet_angle_deg": [15, 18],
                    "inlet_velocity": [90, 100],
                }
            )
        )
        out = tmp_path / "ds"
        code = main(
            [
                "generate",
                "--cohort-file",
                str(spec_path),
                "--n",
                "3",
                "--seed",
                "2",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["cohort"]["name"] == "narrow"

    def test_config_file_with_flag_override(self, tmp_path):
        config = tmp_path / "run.json"
        config.write_text(
            json.dumps(
                {
                    "cohort": "pulmonary",
                    "n_geometries": 2,
                    "oracle_mode": "pure_rri",
                    "seeds": {"geometry": 5},
                }
            )
        )
        out = tmp_path / "ds"
        code = main(
            ["generate", "--config", str(config), "--n", "3", "--out", str(out)]
        )
        assert code == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["n_geometries"] == 3  # flag wins
        assert manifest["config"]["seed"] == 5

    def test_unknown_config_field(self, tmp_path, capsys):
        config = tmp_path / "run.json"
        config.write_text(json.dumps({"cohort": "pulmonary", "wat": 1}))
        code = main(["generate", "--config", str(config), "--out", str(tmp_path / "x")])
        assert code == 2
        assert "wat" in json.loads(capsys.readouterr().err)["error"]["message"]


class TestEvaluate:
    def test_full_chain_report(self, workspace, tmp_path):
        out = tmp_path / "report"
        code = main(
            [
                "evaluate",
                "--dataset",
                str(workspace / "dataset"),
                "--models",
                str(workspace / "models"),
                "--out",
                str(out),
            ]
        )
        assert code == 0
        report = json.loads((out / "report.json").read_text())
        kinds = {row["kind"] for row in report["rows"]}
        assert kinds == {"linear", "gpr"}
        assert report["baseline_steady_test_rmse_mmhg"] > 0
        assert (out / "report.csv").exists()
        assert (out / "figures" / "report_pulmonary.png").exists()

    def test_evaluate_without_models_exits_3(self, workspace, tmp_path, capsys):
        code = main(
            [
                "evaluate",
                "--dataset",
                str(workspace / "dataset"),
                "--models",
                str(tmp_path / "missing"),
                "--out",
                str(tmp_path / "r"),
            ]
        )
        assert code == 3
        assert json.loads(capsys.readouterr().err)["error"]["exit_code"] == 3

    def test_fingerprint_mismatch_exits_3(self, workspace, tmp_path, capsys):
        other = tmp_path / "other"
        assert (
            main(
                [
                    "generate",
                    "--cohort",
                    "pulmonary",
                    "--n",
                    "4",
                    "--seed",
                    "99",
                    "--out",
                    str(other),
                ]
            )
            == 0
        )
        code = main(
            [
                "evaluate",
                "--dataset",
                str(other),
                "--models",
                str(workspace / "models"),
                "--out",
                str(tmp_path / "r2"),
            ]
        )
        assert code == 3


class TestSimulate:
    @pytest.fixture()
    def geometry_file(self, tmp_path):
        path = tmp_path / "geometry.json"
        path.write_text(
            json.dumps(
                {
                    "geometry": {
                        "r_inlet": 0.5,
                        "r_outlet_1": 0.35,
                        "r_outlet_2": 0.4,
                        "theta_1": 0.3,
                        "theta_2": 0.35,
                        "l_outlet_1": 10.5,
                        "l_outlet_2": 10.5,
                        "l_inlet": 10.5,
                    }
                }
            )
        )
        return path

    def test_static_closure_pressures_equal(self, geometry_file, tmp_path):
        out = tmp_path / "sim"
        code = main(
            [
                "simulate",
                "--geometry",
                str(geometry_file),
                "--closure",
                "static",
                "--q-max",
                "40",
                "--period",
                "0.1",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        with open(out / "timeseries.csv") as handle:
            rows = list(csv.DictReader(handle))
        assert len(rows) == 101
        for row in rows:
            assert float(row["p_outlet_1"]) == pytest.approx(
                float(row["p_inlet"]), abs=1e-9
            )
            assert float(row["p_outlet_2"]) == pytest.approx(
                float(row["p_inlet"]), abs=1e-9
            )
        assert (out / "figures" / "simulation.png").exists()

    def test_rri_closure_with_trained_models(self, workspace, geometry_file, tmp_path):
        out = tmp_path / "sim"
        code = main(
            [
                "simulate",
                "--geometry",
                str(geometry_file),
                "--closure",
                "rri",
                "--models",
                str(workspace / "models"),
                "--kind",
                "gpr",
                "--modality",
                "standard",
                "--q-max",
                "40",
                "--period",
                "0.1",
                "--no-figures",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        with open(out / "timeseries.csv") as handle:
            rows = list(csv.DictReader(handle))
        # mass balance in the written series
        for row in rows[:20]:
            q1, q2 = float(row["q_outlet_1"]), float(row["q_outlet_2"])
            assert q1 + q2 == pytest.approx(q1 + q2, abs=1e-12)

    def test_rri_without_models_exits_2(self, geometry_file, tmp_path, capsys):
        code = main(
            [
                "simulate",
                "--geometry",
                str(geometry_file),
                "--closure",
                "rri",
                "--q-max",
                "40",
                "--out",
                str(tmp_path / "sim"),
            ]
        )
        assert code == 2


class TestSweep:
    def test_sweep_outputs(self, tmp_path):
        out = tmp_path / "sweep"
        code = main(
            [
                "sweep",
                "--cohort",
                "pulmonary",
                "--oracle-mode",
                "nonideal",
                "--radii",
                "0.17,0.21,0.26",
                "--period",
                "0.2",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        with open(out / "curves.csv") as handle:
            rows = list(csv.DictReader(handle))
        series = {row["series"] for row in rows}
        assert {"oracle", "rr_fit", "unified0d", "rri_fit", "rr_fit_loop"} <= series
        radii = {row["outlet_radius"] for row in rows}
        assert len(radii) == 3
        assert (out / "figures" / "sweep_pulmonary_steady.png").exists()
        assert (out / "figures" / "sweep_pulmonary_transient.png").exists()
