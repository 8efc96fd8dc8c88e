"""Report rendering for the CLI: CSV tables and matplotlib figures.

The library modules only emit data (JSON lines, dataclasses). Everything that
draws lives here so the core never imports matplotlib.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from matplotlib.figure import Figure

DPI = 150
COLORS = {"sample": "#c0392b", "receive": "#e1a21b", "train": "#2c6fbb", "model": "#555555"}


def _save(fig: Figure, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=DPI, bbox_inches="tight")
    return path


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return path


# --- training -------------------------------------------------------------------

def training_figure(report, path, window: int = 100) -> Path:
    """Episode returns with the sliding mean, and the three throughput curves."""
    fig = Figure(figsize=(10, 4))
    ax_r, ax_t = fig.subplots(1, 2)
    if report.episodes:
        t = np.array([e[2] for e in report.episodes])
        r = np.array([e[1] for e in report.episodes])
        ax_r.plot(t, r, ".", ms=2, alpha=0.35, color="#888888", label="episode")
        k = np.minimum(np.arange(1, len(r) + 1), window)
        c = np.concatenate([[0.0], np.cumsum(r)])
        idx = np.arange(1, len(r) + 1)
        ax_r.plot(t, (c[idx] - c[idx - k]) / k, color="k", lw=1.5, label=f"mean of last {window}")
    if report.target_return is not None:
        ax_r.axhline(report.target_return, ls="--", lw=1, color=COLORS["train"], label="target")
    if report.final_time is not None:
        ax_r.axvline(report.final_time, ls=":", lw=1, color="k")
    ax_r.set_xlabel("wall time (s)")
    ax_r.set_ylabel("return")
    ax_r.legend(loc="lower right", fontsize=8, frameon=False)
    if report.throughput:
        tp = np.array(report.throughput)
        for col, name in ((1, "sample"), (2, "receive"), (3, "train")):
            ax_t.plot(tp[:, 0], tp[:, col], color=COLORS[name], label=name)
    ax_t.set_xlabel("wall time (s)")
    ax_t.set_ylabel("steps / s")
    ax_t.legend(fontsize=8, frameon=False)
    fig.suptitle(f"{report.mode} run, stop reason: {report.reason}", fontsize=10)
    return _save(fig, path)


def training_tables(report, stem) -> list[Path]:
    stem = Path(stem)
    return [
        write_csv(stem.with_name(stem.name + "_episodes.csv"), ["index", "return", "t"],
                  report.episodes),
        write_csv(stem.with_name(stem.name + "_throughput.csv"),
                  ["t", "sample", "receive", "train"], report.throughput),
    ]


# --- commbench ----------------------------------------------------------------------

def commbench_figure(rep, path) -> Path:
    """Measured collection time against the model over the actor sweep, plus the
    size sweep when one was run."""
    panels = 2 if rep.size_rows else 1
    fig = Figure(figsize=(5 * panels, 4))
    axes = np.atleast_1d(fig.subplots(1, panels))
    ax = axes[0]
    n = np.array([r.n_actors for r in rep.rows])
    ax.plot(n, [r.collection_time for r in rep.rows], "o-", color=COLORS["sample"], label="measured")
    ax.plot(n, [r.predicted_time for r in rep.rows], "--", color=COLORS["model"], label="model")
    ax.axvline(rep.predicted_switch, ls=":", lw=1, color=COLORS["model"], label="predicted switch")
    ax.set_xscale("log", base=2)
    ax.set_xticks(n, [str(v) for v in n])
    ax.set_xlabel("actors")
    ax.set_ylabel("collection time (s)")
    ax.set_title(f"sample time {rep.sample_time * 1e3:g} ms, {rep.rows[0].message_size // 1024} KB",
                 fontsize=10)
    ax.legend(fontsize=8, frameon=False)
    if rep.size_rows:
        ax = axes[1]
        kb = np.array([r.message_size / 1024 for r in rep.size_rows])
        ax.plot(kb, [r.bytes_per_s / 1e6 for r in rep.size_rows], "o-", color=COLORS["receive"])
        ax.set_xscale("log", base=2)
        ax.set_xlabel("message size (KB)")
        ax.set_ylabel("receive throughput (MB/s)")
    return _save(fig, path)


# --- scaling --------------------------------------------------------------------------

def scaling_figure(rows, path) -> Path:
    fig = Figure(figsize=(5, 4))
    ax = fig.subplots()
    n = [r.n_actors for r in rows]
    ax.plot(n, [r.sample for r in rows], "-", color=COLORS["sample"], label="sample")
    ax.plot(n, [r.receive for r in rows], "--", color=COLORS["receive"], label="receive")
    ax.plot(n, [r.train for r in rows], "--", color=COLORS["train"], label="train")
    ax.set_xlabel("actors")
    ax.set_ylabel("steps / s")
    ax.legend(fontsize=8, frameon=False)
    return _save(fig, path)


def scaling_table(rows, path) -> Path:
    return write_csv(path, ["n_actors", "sample", "receive", "train"],
                     [(r.n_actors, r.sample, r.receive, r.train) for r in rows])
