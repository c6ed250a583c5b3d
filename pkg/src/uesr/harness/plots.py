"""Learning-curve SVGs from metrics CSVs: mean across runs with a +/- std band."""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .metrics import read_metrics


def curve_band(paths: Sequence, column: str = "deliveries_per_episode"):
    """Stack one column of several runs on their shared env_step prefix.

    Returns ``(env_step, mean, std)``; ``std`` is the population (ddof 0)
    standard deviation across runs, or ``None`` for a single run.
    """
    if not paths:
        raise ValueError("curve_band needs at least one CSV")
    runs = [read_metrics(p) for p in paths]
    for p, run in zip(paths, runs):
        if column not in run:
            raise ValueError(f"{p}: no column {column!r}")
    n = min(len(r["env_step"]) for r in runs)
    steps = np.asarray(runs[0]["env_step"][:n])
    for p, run in zip(paths, runs):
        if not np.array_equal(np.asarray(run["env_step"][:n]), steps):
            raise ValueError(f"{p}: env_step rows differ from {paths[0]}")
    values = np.array([r[column][:n] for r in runs])
    std = values.std(axis=0) if len(runs) > 1 else None
    return steps, values.mean(axis=0), std


def group_by_directory(paths: Sequence) -> dict[str, list[Path]]:
    """``runs/m_ues_r/seed0.csv`` -> label ``m_ues_r``."""
    groups: dict[str, list[Path]] = defaultdict(list)
    for p in map(Path, paths):
        groups[p.parent.name or p.stem].append(p)
    return dict(groups)


def emit_plots(groups: Mapping[str, Sequence], out_path, column: str = "deliveries_per_episode",
               title: str = "Learning curves (training layout)") -> Path:
    """Draw one mean curve (and band, for >1 run) per label into an SVG file.

    Every CSV is read and checked before anything is drawn, so a bad input
    leaves no file behind.
    """
    if not groups:
        raise ValueError("emit_plots needs at least one CSV")
    curves = {label: curve_band(list(paths), column) for label, paths in groups.items()}

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for label, (steps, mean, std) in curves.items():
        (line,) = ax.plot(steps, mean, label=f"{label} (n={len(groups[label])})")
        if std is not None:
            ax.fill_between(steps, mean - std, mean + std, color=line.get_color(), alpha=0.25, linewidth=0)
    ax.set_xlabel("environment steps")
    ax.set_ylabel(column.replace("_", " "))
    ax.set_title(title)
    ax.legend(loc="best", fontsize="small")
    fig.tight_layout()
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, format="svg")
    plt.close(fig)
    return out
