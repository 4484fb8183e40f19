"""Matplotlib rendering of reports, sweeps, and simulations to image files.

All pressure axes are in mmHg.  Rendering is strictly a reporting boundary:
nothing here feeds back into datasets, models, or solver runs; every figure
is drawn from the same data that lands in the CSV outputs.
"""

from __future__ import annotations

import os
from typing import List

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .geometry import to_mmhg
from .pipeline import EvaluationReport, SweepResult
from .solver import NetworkTimeSeries

FIGURE_DPI = 150


def render_report_figure(report: EvaluationReport, path: str) -> str:
    """Bar chart of test RMSE per regressor kind, steady and transient."""
    steady = [r for r in report.rows if r.regime == "steady"]
    transient_std = [
        r for r in report.rows if r.regime == "transient" and r.modality == "standard"
    ]
    transient_to = [
        r for r in report.rows if r.regime == "transient" and r.modality == "to"
    ]
    fig, axes = plt.subplots(1, 2, figsize=(10, 4))

    if steady:
        kinds = [r.kind for r in steady]
        axes[0].bar(kinds, [r.test_rmse_mmhg for r in steady], color="tab:blue")
        axes[0].axhline(
            report.baseline_steady_test_rmse_mmhg,
            color="tab:red",
            linestyle="--",
            label="analytic baseline",
        )
        axes[0].legend()
    axes[0].set_title(f"{report.cohort}: steady test RMSE")
    axes[0].set_ylabel("RMSE (mmHg)")

    if transient_std or transient_to:
        kinds = sorted({r.kind for r in transient_std + transient_to})
        x = np.arange(len(kinds))
        width = 0.38
        std_map = {r.kind: r.test_rmse_mmhg for r in transient_std}
        to_map = {r.kind: r.test_rmse_mmhg for r in transient_to}
        if std_map:
            axes[1].bar(
                x - width / 2,
                [std_map.get(k, np.nan) for k in kinds],
                width,
                label="standard",
                color="tab:blue",
            )
        if to_map:
            axes[1].bar(
                x + width / 2,
                [to_map.get(k, np.nan) for k in kinds],
                width,
                label="transient-optimized",
                color="tab:orange",
            )
        axes[1].set_xticks(x)
        axes[1].set_xticklabels(kinds)
        axes[1].legend()
    axes[1].set_title(f"{report.cohort}: transient test RMSE")
    axes[1].set_ylabel("RMSE (mmHg)")

    fig.tight_layout()
    fig.savefig(path, dpi=FIGURE_DPI)
    plt.close(fig)
    return path


def render_sweep_figures(sweep: SweepResult, out_dir: str) -> List[str]:
    """One steady dP-Q figure and one transient-loop figure per sweep."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    colors = plt.cm.viridis(np.linspace(0.15, 0.85, len(sweep.radius_values)))

    fig, ax = plt.subplots(figsize=(6, 4.5))
    for color, radius in zip(colors, sweep.radius_values):
        oracle = sweep.curve("steady", "oracle", radius)
        rr = sweep.curve("steady", "rr_fit", radius)
        baseline = sweep.curve("steady", "unified0d", radius)
        label = f"r = {radius:.3f} cm"
        ax.plot(rr.q, [to_mmhg(v) for v in rr.dp], "-", color=color, label=label)
        ax.plot(
            baseline.q, [to_mmhg(v) for v in baseline.dp], "--", color=color, lw=1.0
        )
        ax.plot(oracle.q, [to_mmhg(v) for v in oracle.dp], "*", color=color, ms=7)
    ax.set_xlabel("outlet flow (cm$^3$/s)")
    ax.set_ylabel("pressure difference (mmHg)")
    ax.set_title(
        f"{sweep.cohort}: steady (solid: fitted block, dashed: analytic, stars: experiments)"
    )
    ax.legend(fontsize=8)
    fig.tight_layout()
    steady_path = os.path.join(out_dir, f"sweep_{sweep.cohort}_steady.png")
    fig.savefig(steady_path, dpi=FIGURE_DPI)
    plt.close(fig)
    paths.append(steady_path)

    fig, axes = plt.subplots(
        1, len(sweep.radius_values), figsize=(4 * len(sweep.radius_values), 3.6),
        squeeze=False,
    )
    for ax, color, radius in zip(axes[0], colors, sweep.radius_values):
        oracle = sweep.curve("transient", "oracle", radius)
        rri = sweep.curve("transient", "rri_fit", radius)
        rr = sweep.curve("transient", "rr_fit_loop", radius)
        ax.plot(oracle.q, [to_mmhg(v) for v in oracle.dp], "-", color="k", lw=1.8,
                label="experiment")
        ax.plot(rri.q, [to_mmhg(v) for v in rri.dp], "-", color=color, lw=1.2,
                label="fitted block")
        ax.plot(rr.q, [to_mmhg(v) for v in rr.dp], ":", color="tab:red", lw=1.2,
                label="no inductance")
        ax.set_title(f"r = {radius:.3f} cm", fontsize=9)
        ax.set_xlabel("outlet flow (cm$^3$/s)")
        ax.set_ylabel("pressure difference (mmHg)")
        ax.legend(fontsize=7)
    fig.suptitle(f"{sweep.cohort}: transient loops")
    fig.tight_layout()
    loop_path = os.path.join(out_dir, f"sweep_{sweep.cohort}_transient.png")
    fig.savefig(loop_path, dpi=FIGURE_DPI)
    plt.close(fig)
    paths.append(loop_path)
    return paths


def render_timeseries_figure(series: NetworkTimeSeries, path: str) -> str:
    """Flows and pressures over time plus the outlet-1 dP-Q trajectory."""
    fig, axes = plt.subplots(1, 3, figsize=(12, 3.6))
    axes[0].plot(series.times, series.q_outlet_1, label="outlet 1")
    axes[0].plot(series.times, series.q_outlet_2, label="outlet 2")
    axes[0].plot(
        series.times, series.q_outlet_1 + series.q_outlet_2, "k--", lw=1, label="inlet"
    )
    axes[0].set_xlabel("t (s)")
    axes[0].set_ylabel("flow (cm$^3$/s)")
    axes[0].legend(fontsize=8)

    axes[1].plot(series.times, [to_mmhg(v) for v in series.p_inlet], label="inlet")
    axes[1].plot(series.times, [to_mmhg(v) for v in series.p_outlet_1], label="outlet 1")
    axes[1].plot(series.times, [to_mmhg(v) for v in series.p_outlet_2], label="outlet 2")
    axes[1].set_xlabel("t (s)")
    axes[1].set_ylabel("pressure (mmHg)")
    axes[1].legend(fontsize=8)

    dp = series.p_outlet_1 - series.p_inlet
    axes[2].plot(series.q_outlet_1, [to_mmhg(v) for v in dp])
    axes[2].set_xlabel("outlet-1 flow (cm$^3$/s)")
    axes[2].set_ylabel("pressure difference (mmHg)")

    fig.tight_layout()
    fig.savefig(path, dpi=FIGURE_DPI)
    plt.close(fig)
    return path
