"""Matplotlib renderings written next to the delimited report files."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .divergence import DivergenceReport

DPI = 150


def score_histogram(report: DivergenceReport, path) -> Path:
    scores = [e.score for e in report.entries]
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.hist(scores, bins=min(60, max(10, len(scores) // 20 or 10)), color="#2E86AB")
    ax.set_xlabel("divergence score")
    ax.set_ylabel("words")
    ax.set_title(
        f"Score distribution: {report.metadata.get('group_1', '?')} vs "
        f"{report.metadata.get('group_2', '?')} ({len(scores)} words)"
    )
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return Path(path)


def top_words_chart(report: DivergenceReport, path, k: int = 30) -> Path:
    top = report.entries[:k]
    words = [e.word for e in top][::-1]
    scores = [e.score for e in top][::-1]
    fig, ax = plt.subplots(figsize=(7, max(3, 0.25 * len(top) + 1)))
    ax.barh(np.arange(len(top)), scores, color="#E94F37")
    ax.set_yticks(np.arange(len(top)))
    ax.set_yticklabels(words, fontsize=8)
    ax.set_xlabel("divergence score")
    ax.set_title(f"Top {len(top)} divergent words")
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return Path(path)


def separation_plot(
    planted_scores, control_scores, path, labels=("planted", "control")
) -> Path:
    """Overlaid score histograms for the synthetic evaluation."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    bins = np.linspace(0.0, max(1.0, float(np.max(planted_scores, initial=1.0))), 40)
    ax.hist(control_scores, bins=bins, alpha=0.6, label=labels[1], color="#2E86AB")
    ax.hist(planted_scores, bins=bins, alpha=0.6, label=labels[0], color="#E94F37")
    ax.set_xlabel("divergence score")
    ax.set_ylabel("words")
    ax.legend()
    ax.set_title("Planted vs control score separation")
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return Path(path)


def render_report_figures(report: DivergenceReport, prefix) -> list[Path]:
    """Standard figure set for a divergence report; returns written paths."""
    prefix = Path(prefix)
    return [
        score_histogram(report, prefix.with_name(prefix.name + "_scores.png")),
        top_words_chart(report, prefix.with_name(prefix.name + "_top_words.png")),
    ]
