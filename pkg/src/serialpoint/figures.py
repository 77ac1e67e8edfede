"""Figure rendering for the report commands.

Pure matplotlib (Agg backend), file output only. Each helper takes already
computed numbers, draws one chart, and returns the path it wrote, so the CLI
can list produced artifacts.
"""

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402


def locality_figure(directory, rows):
    """Bar chart of locality per pattern.

    rows: list of (pattern, mean_distance, p95_distance).
    """
    patterns = [r[0] for r in rows]
    means = [r[1] for r in rows]
    p95s = [r[2] for r in rows]
    x = np.arange(len(patterns))
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(x - 0.2, means, width=0.4, label="mean")
    ax.bar(x + 0.2, p95s, width=0.4, label="p95")
    ax.set_xticks(x, patterns)
    ax.set_ylabel("consecutive-pair distance")
    ax.set_xlabel("curve pattern")
    ax.set_title("Locality along serialized order")
    ax.legend()
    fig.tight_layout()
    path = os.path.join(directory, "locality.png")
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def overlap_figure(directory, rows):
    """Bar chart of patch/KNN overlap per pattern. rows: (pattern, overlap)."""
    patterns = [r[0] for r in rows]
    overlaps = [r[1] for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(np.arange(len(patterns)), overlaps, width=0.5, color="#2a7")
    ax.set_xticks(np.arange(len(patterns)), patterns)
    ax.set_ylim(0.0, 1.0)
    ax.set_ylabel("k nearest found among patch mates")
    ax.set_xlabel("curve pattern")
    ax.set_title("Patch neighborhood quality")
    fig.tight_layout()
    path = os.path.join(directory, "overlap.png")
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def timing_figure(directory, records):
    """Bar chart with std whiskers for a list of TimingRecord."""
    labels = [r.label for r in records]
    means = [r.mean_s for r in records]
    stds = [r.std_s for r in records]
    fig, ax = plt.subplots(figsize=(max(6, 1.2 * len(labels)), 4))
    ax.bar(np.arange(len(labels)), means, yerr=stds, width=0.5, capsize=4, color="#47a")
    ax.set_xticks(np.arange(len(labels)), labels, rotation=20, ha="right")
    ax.set_ylabel("wall time, s (first iteration discarded)")
    ax.set_title("Benchmark timings")
    fig.tight_layout()
    path = os.path.join(directory, "timings.png")
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
