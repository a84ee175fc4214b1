#!/usr/bin/env python3
"""Plot a run record (series.csv and 1D snapshots) to SVG files.

usage: plot_record.py RECORD_DIR [--out DIR]
"""

import argparse
import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def read_csv(path):
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    return {k: [float(r[k]) for r in rows] for k in rows[0]} if rows else {}


def plot_series(series, dim, out):
    fig, axes = plt.subplots(3, 1, figsize=(7, 8), sharex=True)
    t = series["t"]
    for k in range(1, dim + 1):
        axes[0].plot(t, series[f"y_{k}"], label=f"y_{k}")
        axes[1].plot(t, series[f"u_{k}"], label=f"u_{k}")
    axes[0].set_ylabel("mean")
    axes[1].set_ylabel("input")
    axes[2].plot(t, series["funnel"], label="phi |e|")
    axes[2].axhline(1.0, color="k", lw=0.8, ls="--")
    axes[2].set_ylabel("funnel level")
    axes[2].set_xlabel("t")
    for ax in axes:
        ax.legend(loc="best")
    fig.tight_layout()
    fig.savefig(out / "series.svg")
    plt.close(fig)


def plot_snapshots(record, meta, out):
    entries = meta["snapshots"]
    if meta["dimension"] != 1 or not entries:
        return
    step = max(1, len(entries) // 12)
    fig, ax = plt.subplots(figsize=(7, 4))
    for entry in entries[::step]:
        snap = read_csv(record / entry["file"])
        ax.plot(snap["x_1"], snap["p"], lw=0.8, label=f"t = {entry['t']:g}")
    ax.set_xlabel("x")
    ax.set_ylabel("p(t, x)")
    ax.legend(fontsize="small", ncol=2)
    fig.tight_layout()
    fig.savefig(out / "snapshots.svg")
    plt.close(fig)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("record", type=Path)
    parser.add_argument("--out", type=Path, help="output directory (default: RECORD_DIR)")
    args = parser.parse_args()
    out = args.out or args.record
    out.mkdir(parents=True, exist_ok=True)
    meta = json.loads((args.record / "meta.json").read_text())
    plot_series(read_csv(args.record / "series.csv"), meta["dimension"], out)
    plot_snapshots(args.record, meta, out)


if __name__ == "__main__":
    main()
