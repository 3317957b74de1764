"""
Tests for the command-line surface: exit codes, reports and determinism
"""
import json

import pandas as pd
import pytest

from app.cli import commands, run
from app.exceptions import InsufficientDataError
from app.models import RecurrenceReport, RunConfig
from app.services.nodal import ZeroSet, box_counting_dimension


def load_report(directory, command):
    return json.loads((directory / f"{command}_report.json").read_text(encoding="utf-8"))


def test_catalog_lists_formats(tmp_path):
    assert run(["catalog", "--output-dir", str(tmp_path), "--no-timestamp"]) == 0
    report = load_report(tmp_path, "catalog")
    assert set(report) == {"field", "domain", "command", "params", "results", "violations"}
    assert "abc:A,B,C" in report["results"]["formats"]
    assert "generated_at" not in report["params"]


def test_catalog_certifies_a_beltrami_field(tmp_path):
    code = run(["catalog", "--field", "abc:1,0,-1", "--samples", "200", "--output-dir", str(tmp_path)])
    assert code == 0
    report = load_report(tmp_path, "catalog")
    assert report["field"] == "abc:1,0,-1"
    assert report["domain"]["kind"] == "torus3"
    assert report["results"]["beltrami_residual_max"] < 1e-6
    assert report["violations"] == []
    assert "generated_at" in report["params"]


def test_catalog_flags_a_non_beltrami_field(tmp_path):
    source = tmp_path / "stretch.txt"
    source.write_text("sin(x), 0, 0\n", encoding="utf-8")
    code = run(["catalog", "--field", f"expr:{source}", "--samples", "50", "--output-dir", str(tmp_path)])
    assert code == 1
    report = load_report(tmp_path, "catalog")
    assert any(v.startswith("calculus.beltrami_residual") for v in report["violations"])


@pytest.mark.parametrize(
    "argv",
    [
        ["catalog", "--field", "abc:1,2"],
        ["trace", "--field", "nonsense"],
        ["trace"],
        ["boundary", "--field", "abc:1,1,1"],
        ["zeros", "--field", "abc:1,0,-1", "--grid", "4"],
        ["catalog", "--threads", "0"],
    ],
)
def test_usage_errors_exit_2(tmp_path, capsys, argv):
    assert run(argv + ["--output-dir", str(tmp_path)]) == 2
    assert capsys.readouterr().err.startswith("error: ")


def test_catalog_error_names_the_operation(tmp_path, capsys):
    run(["catalog", "--field", "abc:1,2", "--output-dir", str(tmp_path)])
    assert "fields.catalog_lookup" in capsys.readouterr().err


def test_argparse_errors_and_help(capsys):
    assert run(["frobnicate"]) == 2
    assert run(["trace", "--unknown-flag"]) == 2
    assert run(["--help"]) == 0


def test_config_file_is_merged_and_validated(tmp_path):
    good = tmp_path / "good.json"
    good.write_text(json.dumps({"field": "abc:1,0,-1", "samples": 20, "seed": 3}), encoding="utf-8")
    assert run(["catalog", "--config", str(good), "--output-dir", str(tmp_path), "--no-timestamp"]) == 0
    report = load_report(tmp_path, "catalog")
    assert report["params"]["seed"] == 3
    assert report["results"]["points"] == 20

    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"field": "abc:1,0,-1", "bogus": 1}), encoding="utf-8")
    assert run(["catalog", "--config", str(bad), "--output-dir", str(tmp_path)]) == 2


def test_trace_writes_csv_table(tmp_path):
    argv = [
        "trace", "--field", "abc:1,0,-1", "--start", "0", "3.141592653589793", "1.5707963267948966",
        "--t-end", "10", "--format", "csv", "--output-dir", str(tmp_path),
    ]
    assert run(argv) == 0
    report = load_report(tmp_path, "trace")
    assert report["results"]["classification"]["kind"] == "periodic"
    frame = pd.read_csv(tmp_path / "trace_trajectory.csv")
    assert list(frame.columns) == ["t", "x", "y", "z"]
    assert len(frame) == report["results"]["samples"]


def test_zeros_report(tmp_path):
    argv = ["zeros", "--field", "abc:1,0,-1", "--grid", "24", "--format", "csv", "--output-dir", str(tmp_path)]
    assert run(argv) == 0
    results = load_report(tmp_path, "zeros")["results"]
    assert results["cluster_count"] == 2
    assert results["count"] == results["interior_count"] > 0
    table = pd.read_csv(tmp_path / "zeros_records.csv")
    assert len(table) == results["count"]


def test_reports_do_not_depend_on_threads(tmp_path):
    outputs = []
    codes = []
    for threads in ("1", "3"):
        directory = tmp_path / f"threads{threads}"
        argv = [
            "recurrence", "--field", "abc:1,0,-1", "--samples", "16", "--horizon", "8",
            "--threads", threads, "--no-timestamp", "--output-dir", str(directory),
        ]
        codes.append(run(argv))
        outputs.append((directory / "recurrence_report.json").read_bytes())
    assert codes[0] == codes[1]
    assert codes[0] in (0, 1)
    assert outputs[0] == outputs[1]


def test_verify_reports_do_not_depend_on_threads(tmp_path):
    outputs = []
    codes = []
    for threads in ("1", "4"):
        directory = tmp_path / f"threads{threads}"
        argv = [
            "verify", "--field", "abc:1,1,1", "--grid", "24", "--samples", "100",
            "--threads", threads, "--no-timestamp", "--output-dir", str(directory),
        ]
        codes.append(run(argv))
        outputs.append((directory / "verify_report.json").read_bytes())
    assert codes[0] == codes[1]
    assert outputs[0] == outputs[1]


def test_dimension_of_zero_circles(tmp_path):
    assert run(["dimension", "--field", "abc:1,0,-1", "--no-timestamp", "--output-dir", str(tmp_path)]) == 0
    results = load_report(tmp_path, "dimension")["results"]
    assert results["curve_clusters"] == 2
    assert 0.85 <= results["slope"] <= 1.15


def test_point_like_fit_of_zero_curves_fails(tmp_path, monkeypatch):
    def collapse_to_a_point(zs):
        return box_counting_dimension(ZeroSet.from_points([[1.0, 1.0, 1.0]], zs.domain))

    monkeypatch.setattr(commands, "box_counting_dimension", collapse_to_a_point)
    assert run(["dimension", "--field", "abc:1,0,-1", "--grid", "24", "--output-dir", str(tmp_path)]) == 1
    report = load_report(tmp_path, "dimension")
    assert report["results"]["slope"] == pytest.approx(0.0, abs=1e-9)
    assert any(v.startswith("nodal.box_counting_dimension") for v in report["violations"])


def test_missing_fit_of_zero_curves_fails(tmp_path, monkeypatch):
    def no_usable_scales(zs):
        raise InsufficientDataError("only 2 usable box scales (need 3)", "nodal.box_counting_dimension")

    monkeypatch.setattr(commands, "box_counting_dimension", no_usable_scales)
    assert run(["dimension", "--field", "abc:1,0,-1", "--grid", "24", "--output-dir", str(tmp_path)]) == 1


def test_recurrence_drop_is_checked_in_both_directions(degenerate_abc, monkeypatch):
    def fake_experiment(field, n, T, eps, seed, threads=None, tol=None):
        backward = 1.0 if T < 15.0 else 0.9
        return RecurrenceReport(
            n=n, horizon=T, eps=eps, seed=seed, points=[],
            recurrent_fraction_forward=1.0, recurrent_fraction_backward=backward,
        )

    monkeypatch.setattr(commands, "recurrence_experiment", fake_experiment)
    config = RunConfig(command="recurrence", samples=4, horizon=10.0, eps=0.2)
    outcome = commands.recurrence_section(degenerate_abc, config, threads=1)
    assert len(outcome.violations) == 1
    assert "backward fraction drops" in outcome.violations[0]
