"""Optional report rendering: convergence and stability figures plus CSVs.

Only the CLI report path imports this module, keeping the numeric core free
of plotting concerns.  Figures are diagnostic, not contractual output.
"""

from __future__ import annotations

import csv
import math
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .errors import IoError


def _ensure_dir(outdir) -> None:
    try:
        os.makedirs(outdir, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create {outdir}: {exc}") from exc


def write_history_csv(report: dict, path) -> None:
    """Iteration histories as delimited rows (index, residual, dual)."""
    residuals = report.get("residual_history", [])
    duals = report.get("dual_history", [])
    rows = max(len(residuals), len(duals))
    try:
        with open(path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(["index", "residual_linf", "dual_value"])
            for k in range(rows):
                writer.writerow(
                    [
                        k,
                        residuals[k] if k < len(residuals) else "",
                        duals[k] if k < len(duals) else "",
                    ]
                )
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def render_solve_figures(report: dict, outdir) -> list:
    """Residual decay and dual ascent curves; returns the written paths."""
    _ensure_dir(outdir)
    written = []

    fig, ax = plt.subplots(figsize=(6, 4))
    residuals = report.get("residual_history", [])
    ax.semilogy(range(len(residuals)), residuals, marker="o", ms=3)
    if report.get("switch_index") is not None:
        ax.axvline(report["switch_index"] - 0.5, color="gray", ls="--", lw=1,
                   label="method switch")
        ax.legend()
    ax.set_xlabel("accepted iterate")
    ax.set_ylabel("sup-norm residual")
    ax.set_title(f"residual decay ({report.get('method_used', '?')})")
    fig.tight_layout()
    path = os.path.join(outdir, "residual_history.png")
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(6, 4))
    duals = report.get("dual_history", [])
    ax.plot(range(len(duals)), duals, marker=".", ms=3)
    ax.set_xlabel("recorded step")
    ax.set_ylabel("dual objective")
    ax.set_title("dual ascent")
    fig.tight_layout()
    path = os.path.join(outdir, "dual_history.png")
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)

    csv_path = os.path.join(outdir, "history.csv")
    write_history_csv(report, csv_path)
    written.append(csv_path)
    return written


_PAIR_FIELDS = [
    "index",
    "distance_l2",
    "distance_linf",
    "quotient_l2",
    "quotient_linf",
    "segment_norm_max",
    "sup_mu",
    "sup_nu",
    "skipped",
    "failed",
]


def write_pairs_csv(report, path) -> None:
    """Per-pair stability measurements as delimited rows."""
    try:
        with open(path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.DictWriter(handle, fieldnames=_PAIR_FIELDS)
            writer.writeheader()
            for pair in report.pairs:
                row = pair.to_dict()
                writer.writerow({k: ("" if row[k] is None else row[k]) for k in _PAIR_FIELDS})
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def render_stability_figures(report, outdir) -> list:
    """Quotient-vs-bound scatter and quotient histogram; returns paths."""
    _ensure_dir(outdir)
    written = []
    quots = [p.quotient_l2 for p in report.pairs if p.quotient_l2 is not None]
    bounds = [
        p.segment_norm_max
        for p in report.pairs
        if p.quotient_l2 is not None and p.segment_norm_max is not None
    ]

    fig, ax = plt.subplots(figsize=(6, 4))
    if bounds:
        paired = [
            (p.segment_norm_max, p.quotient_l2)
            for p in report.pairs
            if p.quotient_l2 is not None and p.segment_norm_max is not None
        ]
        xs = [b for b, _ in paired]
        ys = [q for _, q in paired]
        ax.scatter(xs, ys, s=14)
        top = max(xs + ys) * 1.1
        ax.plot([0, top], [0, 1.05 * top], color="gray", ls="--", lw=1,
                label="1.05 x segment bound")
        ax.legend()
    ax.set_xlabel("max sensitivity norm on segment")
    ax.set_ylabel("Lipschitz quotient (weighted L2)")
    ax.set_title(f"stability, band {report.band:g}, {report.trials} trials")
    fig.tight_layout()
    path = os.path.join(outdir, "quotients_vs_bounds.png")
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(6, 4))
    if quots:
        ax.hist(quots, bins=min(20, max(5, len(quots) // 2)))
    ax.set_xlabel("Lipschitz quotient (weighted L2)")
    ax.set_ylabel("pairs")
    ax.set_title("quotient distribution")
    fig.tight_layout()
    path = os.path.join(outdir, "quotient_histogram.png")
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)

    csv_path = os.path.join(outdir, "pairs.csv")
    write_pairs_csv(report, csv_path)
    written.append(csv_path)
    return written
