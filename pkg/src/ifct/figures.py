"""PNG figures for evaluation results (Agg backend, no display needed)."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .bench.metrics import EvalResult  # noqa: E402

# without this the PNG embeds the matplotlib version and differs across installs
_SAVE_KW = {"dpi": 100, "metadata": {"Software": None}}


def plot_mode_comparison(results: Sequence[EvalResult], path) -> Path:
    names = ("accuracy", "weighted_f1", "explanation_accuracy")
    x = np.arange(len(results))
    width = 0.27
    fig, ax = plt.subplots(figsize=(6.4, 3.6))
    for i, name in enumerate(names):
        ax.bar(x + (i - 1) * width, [getattr(r, name) for r in results], width, label=name.replace("_", " "))
    ax.set_xticks(x, [r.mode or "?" for r in results])
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("score")
    ax.legend(fontsize=8, loc="upper right")
    ax.set_title(f"Modes on {results[0].n_cases} cases" if results else "Modes")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
    return Path(path)


def plot_per_class_f1(results: Sequence[EvalResult], path) -> Path:
    classes = sorted({c.label for r in results for c in r.per_class})
    x = np.arange(len(classes))
    width = 0.8 / max(len(results), 1)
    fig, ax = plt.subplots(figsize=(max(6.4, 0.45 * len(classes) + 2), 4.0))
    for i, r in enumerate(results):
        f1 = {c.label: c.f1 for c in r.per_class}
        ax.bar(x + i * width - 0.4 + width / 2, [f1.get(c, 0.0) for c in classes], width, label=r.mode or "?")
    ax.set_xticks(x, classes, rotation=60, ha="right", fontsize=7)
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("F1")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
    return Path(path)


def write_figures(results: Sequence[EvalResult], out_dir) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return [plot_mode_comparison(results, out_dir / "modes.png"),
            plot_per_class_f1(results, out_dir / "per_class_f1.png")]
