"""Figure rendering for training curves and funnel summaries.

All figures are written to files (Agg backend); nothing interactive. The
training-curve CSV schema is episode,reward,policy_loss,value_loss,entropy,
success; the value-loss series can be scaled x1000 for readability next to
the policy loss.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .harness import FunnelStats
from .loop import TRAINING_CSV_HEADER


class SchemaError(Exception):
    pass


SMOOTH_WINDOW = 50


def smooth(values: np.ndarray, window: int = SMOOTH_WINDOW) -> np.ndarray:
    """Trailing moving average; output has the same length as the input."""
    out = np.empty(len(values), dtype=np.float64)
    csum = np.cumsum(np.insert(values.astype(np.float64), 0, 0.0))
    for i in range(len(values)):
        lo = max(0, i - window + 1)
        out[i] = (csum[i + 1] - csum[lo]) / (i + 1 - lo)
    return out


def read_training_csv(path: str | Path) -> dict[str, np.ndarray]:
    path = Path(path)
    if not path.is_file():
        raise SchemaError(f"training log {path} does not exist")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError("training log is empty") from None
        if tuple(header) != TRAINING_CSV_HEADER:
            raise SchemaError(
                f"unexpected header {header!r}, want {list(TRAINING_CSV_HEADER)}"
            )
        rows = [row for row in reader if row]
    if not rows:
        raise SchemaError("training log has no data rows")
    cols = np.array([[float(v) for v in row] for row in rows], dtype=np.float64).T
    return dict(zip(TRAINING_CSV_HEADER, cols))


def render_training_curves(
    csv_path: str | Path,
    out_dir: str | Path,
    scale_value_loss: bool = False,
) -> list[Path]:
    """Render reward / policy-loss / value-loss curves; returns the files
    written. Smoothed series (window 50) are overlaid on the raw values."""
    data = read_training_csv(csv_path)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    episodes = data["episode"]
    written: list[Path] = []

    def one_figure(series: np.ndarray, label: str, filename: str, color: str):
        fig, ax = plt.subplots(figsize=(7, 4))
        ax.plot(episodes, series, color=color, alpha=0.25, label=label)
        ax.plot(episodes, smooth(series), color=color, label=f"{label} (window {SMOOTH_WINDOW})")
        ax.set_xlabel("episode")
        ax.set_ylabel(label)
        ax.legend(loc="best", fontsize=8)
        fig.tight_layout()
        path = out_dir / filename
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)

    one_figure(data["reward"], "episode reward", "reward.png", "tab:blue")
    one_figure(data["policy_loss"], "policy loss", "policy_loss.png", "tab:orange")
    value = data["value_loss"] * (1000.0 if scale_value_loss else 1.0)
    label = "value loss x 1000" if scale_value_loss else "value loss"
    one_figure(value, label, "value_loss.png", "tab:green")
    return written


def render_funnel(stats: FunnelStats, out_dir: str | Path) -> Path:
    """Bar chart of the synthesis funnel stages."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stages = ["tasks", "verified", "compiled to HLS", "synthesized"]
    counts = [stats.total_tasks, stats.verified, stats.compiled_to_hls, stats.hls_synthesized]
    fig, ax = plt.subplots(figsize=(6, 4))
    bars = ax.bar(stages, counts, color=["#888", "tab:blue", "tab:orange", "tab:green"])
    for bar, count in zip(bars, counts):
        ax.text(bar.get_x() + bar.get_width() / 2, bar.get_height(), str(count),
                ha="center", va="bottom", fontsize=9)
    ax.set_ylabel("tasks")
    ax.set_title(f"synthesis funnel (rate {stats.synth_rate_pct:.1f}%)")
    fig.tight_layout()
    path = out_dir / "funnel.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
