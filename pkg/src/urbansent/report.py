"""Figure rendering over existing stage artifacts.

Figures are pure collation: each one is drawn from a stage CSV already on
disk, never recomputed. A figure whose source artifact is absent is skipped,
so the report stage works on partial pipelines. PNG metadata is stripped to
keep reruns byte-identical.
"""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from . import artifacts as art
from .aggregate import sector_name

_SAVE_OPTS = {"dpi": 120, "metadata": {"Software": None}}


def _save(fig, path: Path) -> None:
    fig.tight_layout()
    fig.savefig(path, **_SAVE_OPTS)
    plt.close(fig)


def _short_sector(name: str, width: int = 24) -> str:
    return name if len(name) <= width else name[: width - 3] + "..."


def figure_classifier_cv(out_dir: Path, path: Path) -> None:
    rows = art.read_artifact(out_dir / "cv_report.csv", "cv_report")
    cells: dict[int, float] = {}
    failed = 0
    for row in rows:
        if row["error"]:
            failed += 1
            continue
        cells[int(row["cell"])] = float(row["mean_accuracy"])
    if not cells:
        raise ValueError("cv_report.csv has no successful cells to plot")
    xs = sorted(cells)
    ys = [cells[i] for i in xs]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(xs, ys, marker="o", markersize=3, linewidth=1)
    best = max(ys)
    ax.axhline(best, color="tab:green", linestyle="--", linewidth=0.8, label=f"best {best:.3f}")
    ax.set_xlabel("grid cell")
    ax.set_ylabel("mean CV accuracy")
    ax.set_title("Hyperparameter search, cross-validated accuracy")
    ax.legend(loc="lower right")
    _save(fig, path)


def figure_naics_distribution(out_dir: Path, path: Path) -> None:
    rows = art.read_artifact(out_dir / "poi_sentiment.csv", "poi_sentiment")
    counts: dict[str, int] = {}
    for row in rows:
        name = sector_name(row["naics"])
        counts[name] = counts.get(name, 0) + 1
    ordered = sorted(counts.items(), key=lambda kv: (kv[1], kv[0]))
    labels = [_short_sector(name) for name, _ in ordered]
    values = [n for _, n in ordered]
    fig, ax = plt.subplots(figsize=(7, max(3, 0.4 * len(ordered) + 1)))
    ax.barh(range(len(ordered)), values, color="tab:blue")
    ax.set_yticks(range(len(ordered)))
    ax.set_yticklabels(labels, fontsize=8)
    ax.set_xlabel("POIs retained")
    ax.set_title("POIs by business sector")
    _save(fig, path)


def figure_sentiment_by_category(out_dir: Path, path: Path) -> None:
    rows = art.read_artifact(out_dir / "poi_sentiment.csv", "poi_sentiment")
    groups: dict[str, list[float]] = {}
    for row in rows:
        groups.setdefault(sector_name(row["naics"]), []).append(float(row["mean"]))
    names = sorted(groups)
    fig, ax = plt.subplots(figsize=(max(6, 0.8 * len(names) + 2), 4.5))
    ax.boxplot([groups[n] for n in names])
    ax.set_xticks(range(1, len(names) + 1))
    ax.set_xticklabels([_short_sector(n, 18) for n in names])
    ax.axhline(0.0, color="gray", linewidth=0.8, linestyle=":")
    ax.set_ylabel("POI mean sentiment")
    ax.set_title("Sentiment by business sector")
    ax.tick_params(axis="x", labelrotation=60, labelsize=8)
    _save(fig, path)


def figure_lsva_scatter(out_dir: Path, path: Path) -> None:
    rows = [r for r in art.read_artifact(out_dir / "lsva.csv", "lsva") if r["naics_category"] == "all"]
    if not rows:
        raise ValueError("lsva.csv has no rows for the combined corpus")
    xs = [float(r["valence"]) for r in rows]
    ys = [float(r["salience"]) for r in rows]
    fig, ax = plt.subplots(figsize=(7, 5))
    ax.scatter(xs, ys, c=xs, cmap="coolwarm", vmin=-1, vmax=1, s=28, edgecolors="k", linewidths=0.3)
    for r, x, y in zip(rows, xs, ys):
        ax.annotate(r["word"], (x, y), textcoords="offset points", xytext=(3, 3), fontsize=7)
    ax.axvline(0.0, color="gray", linewidth=0.8, linestyle=":")
    ax.set_xlim(-1.05, 1.05)
    ax.set_xlabel("valence (share positive minus share negative)")
    ax.set_ylabel("salience (log10 review count)")
    ax.set_title("Salient words in density-related reviews")
    _save(fig, path)


def figure_rmsep_curve(out_dir: Path, path: Path) -> None:
    rows = art.read_artifact(out_dir / "rmsep_curve.csv", "rmsep_curve")
    xs = [int(r["n_components"]) for r in rows]
    ys = [float(r["rmsep"]) for r in rows]
    best = min(range(len(ys)), key=lambda i: ys[i])
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(xs, ys, marker="o", markersize=4)
    ax.plot([xs[best]], [ys[best]], marker="o", markersize=9, mfc="none", mec="tab:red", label=f"selected: {xs[best]}")
    ax.set_xticks(xs)
    ax.set_xlabel("components")
    ax.set_ylabel("cross-validated RMSEP")
    ax.set_title("Component selection")
    ax.legend()
    _save(fig, path)


# figure name -> (renderer, source artifacts it needs)
FIGURES = {
    "classifier_cv.png": (figure_classifier_cv, ("cv_report.csv",)),
    "naics_distribution.png": (figure_naics_distribution, ("poi_sentiment.csv",)),
    "sentiment_by_category.png": (figure_sentiment_by_category, ("poi_sentiment.csv",)),
    "lsva_scatter.png": (figure_lsva_scatter, ("lsva.csv",)),
    "rmsep_curve.png": (figure_rmsep_curve, ("rmsep_curve.csv",)),
}


def render_figures(out_dir) -> tuple[list[str], list[str]]:
    """Render every figure whose source CSVs exist under ``out_dir``.

    Returns (rendered, skipped) figure file names; files land in
    ``out_dir/figures``.
    """
    out_dir = Path(out_dir)
    fig_dir = out_dir / "figures"
    rendered: list[str] = []
    skipped: list[str] = []
    for name, (renderer, sources) in FIGURES.items():
        if not all((out_dir / src).exists() for src in sources):
            skipped.append(name)
            continue
        fig_dir.mkdir(parents=True, exist_ok=True)
        renderer(out_dir, fig_dir / name)
        rendered.append(name)
    return rendered, skipped
