"""
Tests for report emission
"""
import numpy as np
import pandas as pd
import pytest

from app.exceptions import ConfigurationError
from app.models import RecurrenceReport, Report
from app.services.flow import recurrence_experiment
from app.services.reports import emit_report, plain, report_writer


def make_report(**results):
    return Report(field="abc:1,0,-1", domain={"kind": "torus3"}, command="zeros", params={"seed": 7}, results=results)


def test_plain_converts_numpy_and_non_finite():
    data = plain({"a": np.float64(1.5), "b": np.arange(3), "c": float("nan"), 4: (1, np.int64(2))})
    assert data == {"a": 1.5, "b": [0, 1, 2], "c": None, "4": [1, 2]}


def test_json_report_is_canonical(tmp_path):
    report = make_report(z=1, a=[np.float64(0.25)])
    paths = emit_report(report, str(tmp_path))
    assert paths == [tmp_path / "zeros_report.json"]
    text = paths[0].read_text(encoding="utf-8")
    assert text.index('"a"') < text.index('"z"')
    assert text == report_writer.render(report)
    assert report_writer.load(paths[0]).results == {"a": [0.25], "z": 1}


def test_csv_format_adds_tables(tmp_path):
    tables = {"records": pd.DataFrame({"x": [0.1, 0.2]}), "box_counts": pd.DataFrame({"eps": [1.0]})}
    paths = emit_report(make_report(), str(tmp_path / "out"), "csv", tables)
    assert [p.name for p in paths] == ["zeros_report.json", "zeros_box_counts.csv", "zeros_records.csv"]
    assert pd.read_csv(paths[2])["x"].tolist() == [0.1, 0.2]


def test_json_format_ignores_tables(tmp_path):
    paths = emit_report(make_report(), str(tmp_path), "json", {"records": pd.DataFrame({"x": [1.0]})})
    assert len(paths) == 1


def test_unwritable_directory(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(ConfigurationError):
        emit_report(make_report(), str(blocker))


def test_recurrence_report_survives_emit_and_load(tmp_path, degenerate_abc):
    report = recurrence_experiment(degenerate_abc, 6, 10.0, 0.2, seed=3)
    envelope = Report(
        field=degenerate_abc.name, domain=None, command="recurrence", params={}, results={"report": plain(report)}
    )
    path = emit_report(envelope, str(tmp_path))[0]
    loaded = RecurrenceReport.model_validate(report_writer.load(path).results["report"])
    assert loaded == report
