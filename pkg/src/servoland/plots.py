"""Standard figures for one trace file: laser ranges, feature error and the top-down track."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .harness import read_trace


def _numeric(rows, name) -> np.ndarray:
    return np.array([float(r[name]) if r[name] != "" else np.nan for r in rows])


def plot_trace(trace_path, out_dir=None) -> list[Path]:
    """Render the three standard figures for a trace; returns the written PNG paths.

    Figures go next to the trace unless ``out_dir`` is given.
    """
    trace_path = Path(trace_path)
    out = Path(out_dir) if out_dir is not None else trace_path.parent
    out.mkdir(parents=True, exist_ok=True)
    columns, rows = read_trace(trace_path)
    if not rows:
        raise ValueError(f"{trace_path}: trace has no rows")
    stem = trace_path.stem
    t = _numeric(rows, "t")
    written = []

    lasers = [c for c in columns if c.startswith("laser_")]
    triggered = _numeric(rows, "triggered") > 0
    onsets = triggered & ~np.concatenate([[False], triggered[:-1]])
    fig, ax = plt.subplots(figsize=(8, 4))
    for name in lasers:
        ax.plot(t, _numeric(rows, name), label=name.replace("_", " "))
    for tt in t[onsets]:
        ax.axvline(tt, color="k", ls=":", lw=0.8)
    ax.set_xlabel("time [s]")
    ax.set_ylabel("range [m]")
    ax.set_title("laser ranges (dotted: trigger)")
    ax.legend(loc="best")
    written.append(_save(fig, out / f"{stem}_lasers.png"))

    fig, ax = plt.subplots(figsize=(8, 4))
    ax.plot(t, _numeric(rows, "feature_error"))
    ax.set_xlabel("time [s]")
    ax.set_ylabel("feature error norm")
    ax.set_title("image feature error")
    written.append(_save(fig, out / f"{stem}_feature_error.png"))

    fig, ax = plt.subplots(figsize=(8, 4))
    ax.plot(_numeric(rows, "x"), _numeric(rows, "y"), label="UAV")
    ax.plot(_numeric(rows, "truck_x"), _numeric(rows, "truck_y"), "--", label="deck center")
    ax.set_xlabel("north [m]")
    ax.set_ylabel("east [m]")
    ax.set_title("top-down trajectory")
    ax.axis("equal")
    ax.legend(loc="best")
    written.append(_save(fig, out / f"{stem}_trajectory.png"))
    return written


def _save(fig, path: Path) -> Path:
    try:
        fig.savefig(path, dpi=100, bbox_inches="tight")
    finally:
        plt.close(fig)
    return path
