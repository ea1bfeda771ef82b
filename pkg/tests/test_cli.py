import json
import subprocess
import sys

import numpy as np
import pytest

from thorin.cli import EXIT_CONFIG, EXIT_DATA, EXIT_OK, main
from thorin.ggc import GgcModel, sample
from thorin.laguerre import CoeffTensor


@pytest.fixture()
def gamma_csv(tmp_path):
    xs = sample(GgcModel([2.0], [[3.0]]), 200_000, seed=17)
    path = tmp_path / "gamma.csv"
    path.write_text("value\n" + "\n".join(f"{v:.17g}" for v in xs.ravel()) + "\n")
    return path


class TestFit:
    def test_self_fit_small_loss(self, tmp_path, gamma_csv):
        out = tmp_path / "fit"
        rc = main(
            [
                "fit",
                "--input", str(gamma_csv),
                "--output", str(out),
                "--n", "1",
                "--m", "2",
                "--seed", "3",
                "--iters", "400",
                "--restarts", "2",
            ]
        )
        assert rc == EXIT_OK
        report = json.loads((out / "report.json").read_text())
        assert report["loss"] < 1e-6
        assert report["wb"]["is_wb"] is True
        for key in ("model", "loss", "wb", "m", "n", "seed", "bits_used", "tool_version"):
            assert key in report
        ct = CoeffTensor.from_json((out / "coeffs.json").read_text())
        assert ct.m == (2,)

    def test_negative_entry_diagnostic(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("1.0,2.0\n0.5,-0.25\n")
        rc = main(["fit", "--input", str(bad), "--output", str(tmp_path / "o"), "--n", "1"])
        assert rc == EXIT_DATA
        err = capsys.readouterr().err
        assert "row 2" in err and "column 2" in err

    def test_ragged_rows_rejected(self, tmp_path):
        bad = tmp_path / "ragged.csv"
        bad.write_text("1.0,2.0\n0.5\n")
        rc = main(["fit", "--input", str(bad), "--output", str(tmp_path / "o"), "--n", "1"])
        assert rc == EXIT_DATA

    def test_missing_n_is_config_error(self, tmp_path, gamma_csv):
        rc = main(["fit", "--input", str(gamma_csv), "--output", str(tmp_path / "o")])
        assert rc == EXIT_CONFIG

    def test_bivariate_csv(self, tmp_path):
        xs = sample(GgcModel([1.0, 1.5], [[1.0, 0.0], [0.5, 2.0]]), 5000, seed=23)
        path = tmp_path / "biv.csv"
        path.write_text("\n".join(f"{a:.17g},{b:.17g}" for a, b in xs) + "\n")
        out = tmp_path / "fit2d"
        rc = main(
            ["fit", "--input", str(path), "--output", str(out), "--n", "2",
             "--m", "2,2", "--seed", "1", "--iters", "150", "--restarts", "1",
             "--swarm", "80"]
        )
        assert rc == EXIT_OK
        report = json.loads((out / "report.json").read_text())
        assert report["m"] == [2, 2]
        assert len(report["model"]["scales"][0]) == 2

    def test_config_file_with_flag_override(self, tmp_path, gamma_csv):
        conf = tmp_path / "fit.conf"
        conf.write_text("n=1\nm=2\niters=50\nseed=9\nrestarts=1\n")
        out = tmp_path / "fit2"
        rc = main(
            [
                "fit",
                "--config", str(conf),
                "--input", str(gamma_csv),
                "--output", str(out),
                "--seed", "12",
            ]
        )
        assert rc == EXIT_OK
        report = json.loads((out / "report.json").read_text())
        assert report["n"] == 1
        assert report["seed"] == 12  # flag wins over the file


class TestSample:
    def test_round_trip_and_determinism(self, tmp_path):
        model_path = tmp_path / "model.json"
        model_path.write_text(GgcModel([2.0], [[1.0, 0.5]]).to_json())
        out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
        for out in (out1, out2):
            rc = main(
                ["sample", "--model", str(model_path), "--N", "500", "--seed", "4",
                 "--output", str(out)]
            )
            assert rc == EXIT_OK
        assert out1.read_bytes() == out2.read_bytes()
        arr = np.loadtxt(out1, delimiter=",")
        assert arr.shape == (500, 2)

    def test_zero_samples_config_error(self, tmp_path):
        model_path = tmp_path / "model.json"
        model_path.write_text(GgcModel([1.0], [[1.0]]).to_json())
        rc = main(
            ["sample", "--model", str(model_path), "--N", "0", "--output",
             str(tmp_path / "x.csv")]
        )
        assert rc == EXIT_CONFIG

    def test_invalid_model_json(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text('{"alpha": [1.0]}')
        rc = main(["sample", "--model", str(bad), "--N", "5", "--output", str(tmp_path / "x.csv")])
        assert rc == EXIT_DATA


class TestCoeffsAndWb:
    def test_coeffs_match_library(self, tmp_path):
        from thorin.ggc import model_coeffs

        model = GgcModel([1.0], [[1.0]])
        model_path = tmp_path / "model.json"
        model_path.write_text(model.to_json())
        out = tmp_path / "coeffs.json"
        rc = main(["coeffs", "--model", str(model_path), "--m", "5", "--output", str(out)])
        assert rc == EXIT_OK
        ct = CoeffTensor.from_json(out.read_text())
        np.testing.assert_allclose(
            ct.a, model_coeffs(model, (5,)).coeffs.as_float(), rtol=1e-12, atol=1e-15
        )

    def test_coeffs_requires_m(self, tmp_path):
        model_path = tmp_path / "model.json"
        model_path.write_text(GgcModel([1.0], [[1.0]]).to_json())
        rc = main(["coeffs", "--model", str(model_path), "--output", str(tmp_path / "c.json")])
        assert rc == EXIT_CONFIG

    def test_check_wb_payload(self, tmp_path):
        model_path = tmp_path / "model.json"
        model_path.write_text(GgcModel([2.0], [[2.0]]).to_json())
        out = tmp_path / "wb.json"
        rc = main(["check-wb", "--model", str(model_path), "--output", str(out)])
        assert rc == EXIT_OK
        payload = json.loads(out.read_text())
        assert payload["is_wb"] is True
        assert payload["best_eps"] == pytest.approx(2.0)
        assert payload["dependence"]["kind"] in ("independent", "comonotonic", "general")


class TestValidateCmd:
    def test_pvalues_and_summary(self, tmp_path):
        model_path = tmp_path / "model.json"
        model_path.write_text(GgcModel([1.0], [[1.0]]).to_json())
        out = tmp_path / "val"
        rc = main(
            ["validate", "--model", str(model_path), "--target", "lognormal",
             "--params", "mu=0,sigma=0.83", "--N", "500", "--B", "4",
             "--seed", "2", "--output", str(out)]
        )
        assert rc == EXIT_OK
        pv = np.loadtxt(out / "pvalues.csv", delimiter=",", skiprows=1)
        assert pv.shape == (4,)
        summary = json.loads((out / "summary.json").read_text())
        assert summary["B"] == 4 and summary["N"] == 500

    def test_unknown_target(self, tmp_path):
        model_path = tmp_path / "model.json"
        model_path.write_text(GgcModel([1.0], [[1.0]]).to_json())
        rc = main(
            ["validate", "--model", str(model_path), "--target", "cauchy",
             "--output", str(tmp_path / "v")]
        )
        assert rc == EXIT_CONFIG


class TestBench:
    def test_deterministic_bytes(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for out in (a, b):
            rc = main(
                ["bench", "--name", "clayton_pareto_lognormal", "--params", "theta=7",
                 "--N", "200", "--seed", "6", "--output", str(out)]
            )
            assert rc == EXIT_OK
        assert a.read_bytes() == b.read_bytes()

    def test_unknown_bench(self, tmp_path):
        rc = main(["bench", "--name", "nope", "--N", "10", "--output", str(tmp_path / "x.csv")])
        assert rc == EXIT_CONFIG


class TestProject:
    def test_weibull_positive_parameters(self, tmp_path):
        out = tmp_path / "proj"
        rc = main(
            ["project", "--density", "weibull", "--params", "k=1.5",
             "--n", "2", "--bits", "128", "--seed", "1", "--iters", "400",
             "--restarts", "1", "--output", str(out)]
        )
        assert rc == EXIT_OK
        report = json.loads((out / "report.json").read_text())
        alpha = np.asarray(report["model"]["alpha"])
        scales = np.asarray(report["model"]["scales"])
        assert np.all(alpha > 0)
        assert np.all(scales.sum(axis=1) > 0)

    def test_pareto_l2_boundary_note(self, tmp_path):
        out = tmp_path / "proj2"
        rc = main(
            ["project", "--density", "pareto", "--params", "k=0.25",
             "--n", "1", "--bits", "64", "--seed", "1", "--iters", "60",
             "--restarts", "1", "--m", "2", "--output", str(out)]
        )
        assert rc == EXIT_OK
        report = json.loads((out / "report.json").read_text())
        assert any("outside L2" in note for note in report["notes"])

    def test_clayton_has_no_formal_density(self, tmp_path):
        rc = main(
            ["project", "--density", "clayton_pareto_lognormal", "--n", "1",
             "--output", str(tmp_path / "p")]
        )
        assert rc == EXIT_CONFIG


class TestEntryPoint:
    def test_usage_error_maps_to_config_exit(self):
        assert main([]) == EXIT_CONFIG

    def test_installed_script_version(self):
        proc = subprocess.run(
            [sys.executable, "-m", "thorin.cli", "--version"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0
        assert "thorin" in proc.stdout
