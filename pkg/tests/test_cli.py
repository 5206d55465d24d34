import io
import json
import os

import pytest

from ui.cli import CommandLineApp


@pytest.fixture(autouse=True)
def keep_test_logging(monkeypatch):
    # pytest のログ捕捉を置き換えないようにする
    monkeypatch.setattr("ui.cli.configure_logging", lambda level: None)


@pytest.fixture
def run_cli(fast_settings):
    def run(argv):
        stdout, stderr = io.StringIO(), io.StringIO()
        app = CommandLineApp(stdout=stdout, stderr=stderr)
        app.settings = fast_settings
        code = app.run(argv)
        return code, stdout.getvalue(), stderr.getvalue()
    return run


def data_args(tabular_files):
    csv_path, schema_path = tabular_files
    return ["--dataset", csv_path, "--schema", schema_path]


def test_audit_prints_report(run_cli, tabular_files):
    argv = ["audit", *data_args(tabular_files), "--repeats", "2", "--postproc", "none", "--postproc", "cafp"]
    code, out, _ = run_cli(argv)
    assert code == 0
    report = json.loads(out)
    assert [row["postproc"] for row in report["rows"]] == ["none", "cafp"]
    assert report["runs"] == {"requested": 2, "succeeded": 2}
    assert "cafp" in report["certificates"]
    assert "generated_at" in report


def test_reproducible_output_is_byte_identical(run_cli, tabular_files):
    argv = ["audit", *data_args(tabular_files), "--repeats", "2", "--postproc", "cafp", "--reproducible"]
    first = run_cli(argv)
    second = run_cli(argv)
    assert first[0] == second[0] == 0
    assert first[1] == second[1]
    assert "generated_at" not in json.loads(first[1])


@pytest.mark.parametrize(
    "extra",
    [
        ["audit", "--model", "quantum"],
        ["audit", "--repeats", "0"],
        ["audit", "--postproc", "magic"],
        ["audit", "--threshold", "1.2"],
        ["audit", "--threshold", "nan"],
        ["certify", "--train-fraction", "1.5"],
        ["sweep", "--train-fraction", "0"],
        ["latency", "--batch", "0"],
    ],
)
def test_invalid_arguments_exit_with_two(run_cli, tabular_files, extra):
    command, *flags = extra
    code, out, _ = run_cli([command, *data_args(tabular_files), *flags])
    assert code == 2
    assert out == ""


@pytest.mark.parametrize("n", ["500", "999", "ten"])
def test_small_synthetic_sample_exits_with_two(run_cli, capsys, n):
    code, out, _ = run_cli(["synthcheck", "--n", n])
    assert code == 2
    assert out == ""
    assert "--n" in capsys.readouterr().err


def test_missing_subcommand_exits_with_two(run_cli):
    assert run_cli([])[0] == 2


def test_missing_dataset_exits_with_one(run_cli, tabular_files, tmp_path):
    _, schema_path = tabular_files
    missing = str(tmp_path / "absent.csv")
    code, out, err = run_cli(["audit", "--dataset", missing, "--schema", schema_path, "--repeats", "1"])
    assert code == 1
    assert out == ""
    assert "absent.csv" in err


def test_plot_data_writes_bar_csv(run_cli, tabular_files, tmp_path):
    plots = tmp_path / "plots"
    argv = ["audit", *data_args(tabular_files), "--repeats", "2", "--postproc", "none", "--plot-data", str(plots)]
    assert run_cli(argv)[0] == 0
    assert (plots / "bars_toy_lr.csv").exists()


def test_sweep_writes_curve_csv(run_cli, tabular_files, tmp_path):
    plots = tmp_path / "plots"
    code, out, _ = run_cli(["sweep", *data_args(tabular_files), "--plot-data", str(plots)])
    assert code == 0
    payload = json.loads(out)
    assert len(payload["thresholds"]) == 25
    assert 0.0 <= payload["cafp_dpd_not_worse_fraction"] <= 1.0
    assert (plots / "sweep_toy_lr.csv").exists()


def test_ablate_reports_three_variants(run_cli, tabular_files):
    code, out, _ = run_cli(["ablate", *data_args(tabular_files), "--repeats", "2"])
    assert code == 0
    assert set(json.loads(out)["rows"]) == {"factual", "counterfactual", "averaged"}


def test_certify_writes_to_out_file(run_cli, tabular_files, tmp_path):
    out_path = str(tmp_path / "certificate.json")
    code, out, _ = run_cli(["certify", *data_args(tabular_files), "--out", out_path, "--reproducible"])
    assert code == 0
    assert out == ""
    with open(out_path, encoding="utf-8") as f:
        certificate = json.load(f)
    assert certificate["bound"] == max(certificate["b0"], certificate["b1"])
    assert certificate["dataset_id"] == "toy"
    assert "holds" in certificate


def test_latency_reports_both_timings(run_cli, tabular_files):
    code, out, _ = run_cli(["latency", *data_args(tabular_files), "--batch", "20"])
    assert code == 0
    payload = json.loads(out)
    assert payload["batch"] == 20
    assert payload["trials"] >= 20
    assert payload["base_ms_per_100"] > 0


def test_synthcheck_passes(run_cli):
    code, out, _ = run_cli(["synthcheck", "--seed", "0", "--reproducible"])
    assert code == 0
    ledger = json.loads(out)
    assert ledger["passed"] is True
    assert len(ledger["entries"]) == 4


def test_threshold_flag_reaches_report(run_cli, tabular_files):
    argv = ["audit", *data_args(tabular_files), "--repeats", "1", "--postproc", "none", "--threshold", "0.3"]
    code, out, _ = run_cli(argv)
    assert code == 0
    assert json.loads(out)["config"]["experiment"]["threshold"] == 0.3
    assert os.path.basename(json.loads(out)["config"]["experiment"]["dataset_path"]) == "toy.csv"
