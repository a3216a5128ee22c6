"""Report figures rendered next to the delimited outputs.

Everything draws through the Agg backend so figures can be produced on
headless workers; each function writes a file and returns its path.
"""
from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .extrapolate import FitResult, VariancePoint  # noqa: E402

__all__ = ["plot_pes", "plot_extrapolation"]


def plot_pes(csv_path, out_path=None):
    """Binding-energy curve(s) from a PES CSV, one line per method.

    Labels that parse as numbers become the x axis; otherwise points are
    plotted in file order.
    """
    csv_path = Path(csv_path)
    out_path = Path(out_path) if out_path else csv_path.with_suffix(".png")
    by_method: dict[str, list[tuple[float, float]]] = {}
    with open(csv_path) as fh:
        for i, row in enumerate(csv.DictReader(fh)):
            if row["binding_kcal_mol"] in ("", None):
                continue
            try:
                x = float(row["label"])
            except ValueError:
                x = float(i)
            by_method.setdefault(row["method"], []).append(
                (x, float(row["binding_kcal_mol"]))
            )
    fig, ax = plt.subplots(figsize=(6, 4))
    for method, pts in sorted(by_method.items()):
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=method)
    ax.axhline(0.0, color="k", ls="--", lw=0.8)
    ax.set_xlabel("separation label")
    ax.set_ylabel("binding energy (kcal/mol)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def plot_extrapolation(points: list[VariancePoint], fit: FitResult, out_path):
    """Energy vs scaled variance with the fitted line extended to x = 0."""
    out_path = Path(out_path)
    xs = [p.x for p in points]
    es = [p.e for p in points]
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(xs, es, "^", color="tab:green", label="subspace energies")
    xmax = max(xs)
    ax.plot(
        [0, xmax],
        [fit.intercept, fit.intercept + fit.slope * xmax],
        "--",
        color="gray",
        label="linear fit",
    )
    ax.errorbar(
        [0.0],
        [fit.intercept],
        yerr=[fit.intercept_stderr],
        fmt="s",
        color="tab:gray",
        capsize=4,
        label="zero-variance estimate",
    )
    ax.set_xlabel("variance / energy$^2$")
    ax.set_ylabel("energy (hartree)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path
