import csv
import io

import pytest

from sketchmotion.errors import ValidationError
from sketchmotion.report import (
    plan_report_to_csv,
    render_curve_figure,
    render_plan_figure,
    write_curve_outputs,
    write_plan_report,
)
from sketchmotion.rl import parse_curve_csv

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"

CURVE = [
    {"step": 0, "success_rate": 0.0, "actor_loss": 0.0, "critic_loss": 0.0},
    {"step": 100, "success_rate": 0.45, "actor_loss": -0.0625, "critic_loss": 0.013},
    {"step": 200, "success_rate": 0.95, "actor_loss": -0.125, "critic_loss": 0.0042},
]


def plan_report(n=4):
    rows = [
        {"t": t + 1, "reproj_px": {"cam2": 0.5 + 0.1 * t, "cam1": 0.25 * t}, "sigma_trace": 1e-4 * t}
        for t in range(n)
    ]
    return {
        "per_timestep": rows,
        "max_reproj_px": max(max(r["reproj_px"].values()) for r in rows),
        "max_sigma_trace": rows[-1]["sigma_trace"],
        "gripper_transitions": 1,
    }


class TestCurveOutputs:
    def test_writes_csv_and_png(self, tmp_path):
        csv_path, png_path = write_curve_outputs(CURVE, tmp_path / "out")
        assert csv_path.name == "curve.csv" and png_path.name == "curve.png"
        assert parse_curve_csv(csv_path.read_bytes()) == CURVE
        assert png_path.read_bytes()[:8] == PNG_MAGIC
        assert png_path.stat().st_size > 1000

    def test_custom_stem(self, tmp_path):
        csv_path, png_path = write_curve_outputs(CURVE, tmp_path, stem="run7")
        assert csv_path.name == "run7.csv" and png_path.name == "run7.png"

    def test_empty_curve_rejected(self, tmp_path):
        with pytest.raises(ValidationError):
            render_curve_figure([], tmp_path / "x.png")
        with pytest.raises(ValidationError):
            write_curve_outputs([], tmp_path)


class TestPlanReportCsv:
    def test_header_sorts_view_columns(self):
        text = plan_report_to_csv(plan_report()).decode()
        rows = list(csv.reader(io.StringIO(text)))
        assert rows[0] == ["t", "reproj_px_cam1", "reproj_px_cam2", "sigma_trace"]
        assert len(rows) == 5

    def test_values_round_trip_exactly(self):
        report = plan_report()
        text = plan_report_to_csv(report).decode()
        rows = list(csv.reader(io.StringIO(text)))[1:]
        for row, src in zip(rows, report["per_timestep"]):
            assert int(row[0]) == src["t"]
            assert float(row[1]) == src["reproj_px"]["cam1"]
            assert float(row[2]) == src["reproj_px"]["cam2"]
            assert float(row[3]) == src["sigma_trace"]

    def test_infinite_error_survives(self):
        report = plan_report(2)
        report["per_timestep"][1]["reproj_px"]["cam1"] = float("inf")
        text = plan_report_to_csv(report).decode()
        assert "inf" in text.splitlines()[2]

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            plan_report_to_csv({"per_timestep": []})


class TestPlanReportOutputs:
    def test_writes_both_files(self, tmp_path):
        report = plan_report()
        csv_path, png_path = write_plan_report(report, tmp_path / "r")
        assert csv_path.name == "plan_report.csv" and png_path.name == "plan_report.png"
        assert csv_path.read_bytes() == plan_report_to_csv(report)
        assert png_path.read_bytes()[:8] == PNG_MAGIC

    def test_empty_rejected(self, tmp_path):
        with pytest.raises(ValidationError):
            render_plan_figure({"per_timestep": []}, tmp_path / "x.png")
