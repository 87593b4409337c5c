"""Figure and CSV rendering for training curves and plan diagnostics.

Every figure is written next to a delimited file carrying the same
numbers, so results stay scriptable without reparsing images.
"""

import csv
import io
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .errors import ValidationError
from .rl.train import curve_to_csv


def render_curve_figure(curve, png_path):
    """Success rate and losses over training steps, one PNG."""
    if not curve:
        raise ValidationError("curve has no rows", field="curve")
    steps = [row["step"] for row in curve]
    rates = [row["success_rate"] for row in curve]
    a_loss = [row["actor_loss"] for row in curve]
    c_loss = [row["critic_loss"] for row in curve]
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    ax1.plot(steps, rates, marker="o", color="tab:blue")
    ax1.set_ylabel("success rate")
    ax1.set_ylim(-0.05, 1.05)
    ax1.grid(True, alpha=0.3)
    ax2.plot(steps, a_loss, label="actor", color="tab:orange")
    ax2.plot(steps, c_loss, label="critic", color="tab:green")
    ax2.set_xlabel("training step")
    ax2.set_ylabel("loss")
    ax2.legend()
    ax2.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(png_path, dpi=120)
    plt.close(fig)
    return Path(png_path)


def write_curve_outputs(curve, out_dir, stem="curve"):
    """curve.csv and curve.png side by side; returns both paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{stem}.csv"
    png_path = out_dir / f"{stem}.png"
    csv_path.write_bytes(curve_to_csv(curve))
    render_curve_figure(curve, png_path)
    return csv_path, png_path


def plan_report_to_csv(report) -> bytes:
    """Per-timestep diagnostics as CSV: t, one reprojection column per view, trace."""
    rows = report["per_timestep"]
    if not rows:
        raise ValidationError("report has no rows", field="report")
    view_ids = sorted(rows[0]["reproj_px"])
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t", *[f"reproj_px_{vid}" for vid in view_ids], "sigma_trace"])
    for row in rows:
        writer.writerow(
            [row["t"], *[repr(float(row["reproj_px"][vid])) for vid in view_ids],
             repr(float(row["sigma_trace"]))]
        )
    return buf.getvalue().encode("utf-8")


def render_plan_figure(report, png_path):
    """Reprojection error per view, covariance trace, and a summary box."""
    rows = report["per_timestep"]
    if not rows:
        raise ValidationError("report has no rows", field="report")
    ts = [row["t"] for row in rows]
    view_ids = sorted(rows[0]["reproj_px"])
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    for vid in view_ids:
        ax1.plot(ts, [row["reproj_px"][vid] for row in rows], marker=".", label=f"view {vid}")
    ax1.set_ylabel("reprojection error (px)")
    ax1.legend()
    ax1.grid(True, alpha=0.3)
    ax2.plot(ts, [row["sigma_trace"] for row in rows], color="tab:red", marker=".")
    ax2.set_xlabel("timestep")
    ax2.set_ylabel("trace of covariance (m$^2$)")
    ax2.grid(True, alpha=0.3)
    summary = (
        f"max reproj {report['max_reproj_px']:.3g} px\n"
        f"max trace {report['max_sigma_trace']:.3g} m2\n"
        f"gripper transitions {report['gripper_transitions']}"
    )
    ax1.set_title(summary, fontsize=9, loc="right")
    fig.tight_layout()
    fig.savefig(png_path, dpi=120)
    plt.close(fig)
    return Path(png_path)


def write_plan_report(report, out_dir, stem="plan_report"):
    """CSV plus PNG for one plan's diagnostics; returns both paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{stem}.csv"
    png_path = out_dir / f"{stem}.png"
    csv_path.write_bytes(plan_report_to_csv(report))
    render_plan_figure(report, png_path)
    return csv_path, png_path
