"""Figure rendering for experiment reports and simulated paths.

Optional presentation layer: nothing here feeds back into computation or
report content.  The CLI enables it with ``--figures``; library users call
:func:`render_report_figures` directly.  Rendering uses the Agg backend so
it works headless, and every figure derives from report data alone, so the
same report yields the same figures.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg", force=False)

import matplotlib.pyplot as plt
import numpy as np

from .experiments import ExperimentReport
from .field_core import FieldSample

__all__ = ["render_report_figures", "render_field_figure"]

_STYLE = {
    "figure.figsize": (7.0, 4.5),
    "figure.dpi": 130,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 10,
}


def _save(fig, path: Path) -> Path:
    fig.savefig(path, bbox_inches="tight")
    plt.close(fig)
    return path


def _trial_matrix(report: ExperimentReport, key: str) -> np.ndarray:
    return np.array([row[key] for row in report.trial_rows], dtype=float)


def _decay_axes(ax, checkpoints, matrix: np.ndarray, label: str) -> None:
    q25, q50, q75 = np.percentile(matrix, [25, 50, 75], axis=0)
    ax.fill_between(checkpoints, q25, q75, alpha=0.25, label="interquartile")
    ax.plot(checkpoints, q50, marker="o", label="median")
    ax.set_xscale("log", base=2)
    if np.any(matrix > 0):  # an all-zero metric cannot be log-scaled
        ax.set_yscale("log")
    ax.set_xlabel("partial-sum order n")
    ax.set_ylabel(label)
    ax.legend()


def render_report_figures(
    report: ExperimentReport, out_dir: str | Path, stem: str
) -> list[Path]:
    """Render the standard figure set for one report into ``out_dir``.

    Continuity reports get sup-error decay, the Hoelder-functional trace,
    and the increment-ratio distribution; smooth reports get C^m error
    decay, the top-derivative seminorm decay, and observed-vs-bound tail
    scatter.  Returns the written paths in render order.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    checkpoints = report.aggregates["checkpoints"]
    written: list[Path] = []

    with plt.rc_context(_STYLE):
        if report.kind == "continuity":
            fig, ax = plt.subplots()
            _decay_axes(ax, checkpoints, _trial_matrix(report, "sup_error"),
                        "sup error vs limit proxy")
            ax.set_title("Partial-sum convergence")
            written.append(_save(fig, out_dir / f"{stem}_sup_error.png"))

            fig, ax = plt.subplots()
            _decay_axes(ax, checkpoints, _trial_matrix(report, "mn"),
                        "Hoelder functional")
            ax.set_yscale("linear")
            ax.set_title("Regularity functional along the ladder")
            written.append(_save(fig, out_dir / f"{stem}_functional.png"))

            ratios = _trial_matrix(report, "increment_ratios")
            if ratios.size == 0:
                return written
            fig, ax = plt.subplots()
            ax.boxplot(
                [ratios[:, i][~np.isnan(ratios[:, i])] for i in range(ratios.shape[1])],
                tick_labels=[str(c) for c in checkpoints[1:]],
            )
            ax.axhline(1.0, color="crimson", lw=0.8, ls="--")
            ax.set_xlabel("checkpoint n")
            ax.set_ylabel("successive increment-sup ratio")
            ax.set_title("Increment contraction")
            written.append(_save(fig, out_dir / f"{stem}_increment_ratio.png"))
        elif report.kind == "smooth":
            fig, ax = plt.subplots()
            _decay_axes(ax, checkpoints, _trial_matrix(report, "cm_error"),
                        "C^m error vs limit proxy")
            ax.set_title("Smooth-norm convergence")
            written.append(_save(fig, out_dir / f"{stem}_cm_error.png"))

            fig, ax = plt.subplots()
            _decay_axes(ax, checkpoints, _trial_matrix(report, "top_seminorm"),
                        "top-derivative seminorm of the tail")
            ax.set_title("Top-derivative seminorm decay")
            written.append(_save(fig, out_dir / f"{stem}_top_seminorm.png"))

            observed = _trial_matrix(report, "tail_observed")
            bound = _trial_matrix(report, "tail_bound")
            fig, ax = plt.subplots()
            for i, c in enumerate(checkpoints):
                ax.scatter(bound[:, i], observed[:, i], s=8, alpha=0.5, label=f"n={c}")
            lim = max(float(bound.max()), float(observed.max()))
            lo = min(float(bound[bound > 0].min(initial=lim)), float(observed[observed > 0].min(initial=lim)))
            ax.plot([lo, lim], [lo, lim], color="crimson", lw=0.8, ls="--")
            ax.set_xscale("log")
            ax.set_yscale("log")
            ax.set_xlabel("deterministic tail bound")
            ax.set_ylabel("observed tail functional")
            ax.set_title("Per-path tail certificates")
            ax.legend()
            written.append(_save(fig, out_dir / f"{stem}_tail_bound.png"))
        else:
            raise ValueError(f"no figure set for report kind {report.kind!r}")
    return written


def render_field_figure(fields: list[FieldSample], path: str | Path) -> Path:
    """Plot one-dimensional field samples on shared axes (e.g. a checkpoint
    ladder of one path)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        for sample in fields:
            if sample.grid.domain.dim != 1:
                raise ValueError("field figures are for one-dimensional samples")
            ax.plot(sample.grid.points[:, 0], sample.values, lw=1.0, label=sample.label)
        ax.set_xlabel("x")
        ax.set_ylabel("field value")
        if any(s.label for s in fields):
            ax.legend()
        return _save(fig, path)
