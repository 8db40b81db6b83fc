"""Figures rendered from ``summary.csv`` rows.

Rendering uses the non-interactive Agg backend and only reads the summary
table, so figures can be regenerated later from the CSVs alone.
"""

from __future__ import annotations

import math
import os
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "figure.figsize": (6.4, 4.0),
    "figure.dpi": 110,
    "font.size": 10,
    "axes.labelsize": 10,
    "axes.titlesize": 11,
    "legend.fontsize": 8,
    "xtick.labelsize": 9,
    "ytick.labelsize": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.5,
    "lines.markersize": 5,
    "savefig.bbox": "tight",
}

# CLAGA curves are drawn black and dotted
VARIANT_STYLE = {
    "vanilla": dict(linestyle="-", marker="o"),
    "claga": dict(linestyle=":", marker="s", color="black"),
}


def _f(v):
    try:
        return float(v)
    except (TypeError, ValueError):
        return math.nan


def _axis_value(cell, axis):
    for part in cell.split(";"):
        k, _, v = part.partition("=")
        if k == axis:
            return _f(v)
    return math.nan


def _grid_axes(rows):
    axes = []
    for r in rows:
        if r["cell"] in ("default",) or r["cell"].startswith("trend:"):
            continue
        for part in r["cell"].split(";"):
            k = part.partition("=")[0]
            if k not in axes:
                axes.append(k)
    return axes


def _save(fig, path):
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_metric_vs_axis(rows, metric, axis, path, ylabel=None, title=None):
    series = defaultdict(list)
    for r in rows:
        if r["metric"] != metric:
            continue
        x = _axis_value(r["cell"], axis)
        if math.isnan(x):
            continue
        series[(r["algorithm"], r["variant"])].append((x, _f(r["mean"]), _f(r["sd"])))
    if not series:
        return None
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for (algo, variant), pts in sorted(series.items()):
            pts.sort()
            xs, ys, sds = zip(*pts)
            style = dict(VARIANT_STYLE.get(variant, {}))
            label = f"{algo} ({variant})"
            ax.errorbar(xs, ys, yerr=[0 if math.isnan(s) else s for s in sds],
                        label=label, capsize=2, **style)
        if min(x for pts in series.values() for x, _, _ in pts) > 0:
            ax.set_xscale("log")
        ax.set_xlabel(axis)
        ax.set_ylabel(ylabel or metric)
        if title:
            ax.set_title(title)
        ax.legend()
        return _save(fig, path)


def plot_grouped_bars(rows, metric, path, ylabel=None, refline=None, title=None):
    vals = defaultdict(dict)
    for r in rows:
        if r["metric"] == metric:
            vals[r["algorithm"]][r["variant"]] = (_f(r["mean"]), _f(r["sd"]))
    if not vals:
        return None
    algos = sorted(vals)
    variants = sorted({v for d in vals.values() for v in d})
    width = 0.8 / len(variants)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for j, variant in enumerate(variants):
            xs = [i + (j - (len(variants) - 1) / 2) * width for i in range(len(algos))]
            ms = [vals[a].get(variant, (math.nan, 0))[0] for a in algos]
            sds = [vals[a].get(variant, (0, math.nan))[1] for a in algos]
            sds = [0 if math.isnan(s) else s for s in sds]
            color = "black" if variant == "claga" else None
            ax.bar(xs, ms, width, yerr=sds, capsize=2, label=variant, color=color,
                   alpha=0.8 if variant == "claga" else 1.0)
        if refline is not None:
            ax.axhline(refline, color="grey", linestyle="--", linewidth=1)
        ax.set_xticks(range(len(algos)))
        ax.set_xticklabels(algos)
        ax.set_ylabel(ylabel or metric)
        if title:
            ax.set_title(title)
        ax.legend()
        return _save(fig, path)


TERMS = ("mean_model_error", "mean_model_target_cov", "mean_wvg", "mean_sdmg", "mean_target_bias_sq")


def plot_decomposition(rows, path):
    bars = defaultdict(dict)
    for r in rows:
        if r["metric"] in TERMS or r["metric"] == "mean_total":
            bars[(r["algorithm"], r["variant"])][r["metric"]] = _f(r["mean"])
    if not bars:
        return None
    keys = sorted(bars)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        pos = [0.0] * len(keys)
        neg = [0.0] * len(keys)
        for term in TERMS:
            h = [bars[k].get(term, 0.0) for k in keys]
            bottom = [p if v >= 0 else q for v, p, q in zip(h, pos, neg)]
            ax.bar(range(len(keys)), h, 0.6, bottom=bottom, label=term.replace("mean_", ""))
            pos = [p + max(v, 0) for v, p in zip(h, pos)]
            neg = [q + min(v, 0) for v, q in zip(h, neg)]
        ax.plot(range(len(keys)), [bars[k].get("mean_total", math.nan) for k in keys],
                "kD", label="measured total")
        ax.axhline(0.0, color="grey", linewidth=0.8)
        ax.set_xticks(range(len(keys)))
        ax.set_xticklabels([f"{a}\n{v}" for a, v in keys])
        ax.set_ylabel("mean over instances")
        ax.legend(ncol=2)
        return _save(fig, path)


def render_figures(experiment, summary_rows, out_dir):
    """Write the figures appropriate for ``experiment``; returns their paths."""
    fig_dir = os.path.join(out_dir, "figures")
    os.makedirs(fig_dir, exist_ok=True)
    rows = [r for r in summary_rows if not r["cell"].startswith("trend:")]
    paths = []
    if experiment in ("sweep_discrepancy", "sweep_complexity"):
        metric = "discrepancy_ratio" if experiment == "sweep_discrepancy" else "pehe"
        for axis in _grid_axes(rows):
            p = plot_metric_vs_axis(rows, metric, axis,
                                    os.path.join(fig_dir, f"{metric}_vs_{axis}.png"),
                                    ylabel=metric.replace("_", " "))
            paths.append(p)
        if experiment == "sweep_complexity":
            for axis in _grid_axes(rows):
                paths.append(plot_metric_vs_axis(
                    rows, "pehe_ratio", axis,
                    os.path.join(fig_dir, f"pehe_ratio_vs_{axis}.png"),
                    ylabel="PEHE ratio (CLAGA / vanilla)"))
    elif experiment == "benchmark_pehe":
        paths.append(plot_grouped_bars(rows, "pehe", os.path.join(fig_dir, "pehe.png"), "PEHE"))
        paths.append(plot_grouped_bars(rows, "pehe_ratio", os.path.join(fig_dir, "pehe_ratio.png"),
                                       "PEHE ratio (CLAGA / vanilla)", refline=1.0))
    elif experiment == "auuc_eval":
        paths.append(plot_grouped_bars(rows, "auuc", os.path.join(fig_dir, "auuc.png"), "AUUC"))
    elif experiment == "verify_decomposition":
        paths.append(plot_decomposition(rows, os.path.join(fig_dir, "decomposition.png")))
    return [p for p in paths if p]


PLOTSCRIPT = '''\
"""Re-render the figures for this run from its CSV output.

Usage: python {name} [output_dir]
"""
import csv
import os
import sys

from catekit.experiments.plotting import render_figures

here = sys.argv[1] if len(sys.argv) > 1 else os.path.dirname(os.path.abspath(__file__))
with open(os.path.join(here, "summary.csv"), newline="", encoding="utf-8") as fh:
    rows = list(csv.DictReader(fh))
for path in render_figures({experiment!r}, rows, here):
    print(path)
'''


def write_plotscript(experiment, out_dir, name="plot_results.py"):
    path = os.path.join(out_dir, name)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(PLOTSCRIPT.format(name=name, experiment=experiment))
    return path
