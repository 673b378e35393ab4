"""Figure rendering for the CLI report paths.

Each CSV the CLI emits can be accompanied by a PNG with the same stem. Uses
the Agg backend; files are written atomically (temp file, then rename).
"""

from __future__ import annotations

import os
import tempfile
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["render_sweep_figure", "render_recsys_figure"]


def _atomic_savefig(fig, path: Path) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=path.suffix)
    os.close(fd)
    try:
        fig.savefig(tmp, dpi=150)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)
        plt.close(fig)


def render_sweep_figure(rows: list[dict], path, criterion: str) -> None:
    """Two panels: the equivalent certificate constant vs. SNR (median across
    seeds with min/max band) and the greedy vs. random cost curves."""
    snrs = sorted({r["snr_db"] for r in rows})
    key = "equiv_alpha" if criterion == "A" else "equiv_epsilon"

    def stats(field):
        med, lo, hi = [], [], []
        for s in snrs:
            vals = [r[field] for r in rows if r["snr_db"] == s]
            med.append(np.median(vals))
            lo.append(np.min(vals))
            hi.append(np.max(vals))
        return np.array(med), np.array(lo), np.array(hi)

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.6))
    med, lo, hi = stats(key)
    ax1.plot(snrs, med, marker="o", color="tab:blue")
    ax1.fill_between(snrs, lo, hi, alpha=0.2, color="tab:blue")
    ax1.set_xlabel("SNR (dB)")
    ax1.set_ylabel("equivalent alpha" if criterion == "A" else "equivalent epsilon")
    if criterion == "E":
        ax1.set_yscale("log")
    ax1.set_title(f"certificate constant ({criterion} criterion)")

    for field, label, color in (
        ("greedy_cost", "greedy", "tab:green"),
        ("random_cost", "random", "tab:orange"),
    ):
        med, lo, hi = stats(field)
        ax2.plot(snrs, med, marker=".", label=label, color=color)
        ax2.fill_between(snrs, lo, hi, alpha=0.15, color=color)
    ax2.set_xlabel("SNR (dB)")
    ax2.set_ylabel("normalized cost")
    ax2.set_title("design cost at budget k")
    ax2.legend()
    fig.tight_layout()
    _atomic_savefig(fig, Path(path))


def render_recsys_figure(rows: list[dict], path) -> None:
    """MAE vs. survey size per selection method."""
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    for method, color in (("greedy", "tab:green"), ("random", "tab:orange")):
        pts = sorted(
            (r["k"], r["mae"]) for r in rows if r["method"] == method
        )
        if pts:
            ks, maes = zip(*pts)
            ax.plot(ks, maes, marker="o", label=method, color=color)
    ax.set_xlabel("designed movies k")
    ax.set_ylabel("held-out MAE")
    ax.set_title("cold-start survey quality")
    ax.legend()
    fig.tight_layout()
    _atomic_savefig(fig, Path(path))
