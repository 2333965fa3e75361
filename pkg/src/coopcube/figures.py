"""Matplotlib renderings of the analysis document.

Everything draws to Figure objects and saves to files; no interactive
backend is ever needed, so Agg is forced before pyplot loads.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .space import FeatureVector, layer  # noqa: E402

STABLE_COLOR = "#4477aa"
UNSTABLE_COLOR = "#ee7733"
LAYER_COLOR = "#228833"


def _sorted_labels(estimates: dict[str, dict]) -> list[str]:
    return sorted(estimates, key=lambda s: (layer(FeatureVector.from_string(s)), s))


def _bars_with_ci(ax, labels: list[str], estimates: dict[str, dict], colors) -> None:
    values = [estimates[k]["value"] for k in labels]
    err_low = [estimates[k]["value"] - estimates[k]["ci_low"] for k in labels]
    err_high = [estimates[k]["ci_high"] - estimates[k]["value"] for k in labels]
    ax.bar(range(len(labels)), values, color=colors, edgecolor="black", linewidth=0.6)
    ax.errorbar(
        range(len(labels)),
        values,
        yerr=[err_low, err_high],
        fmt="none",
        ecolor="black",
        capsize=3,
        linewidth=1,
    )
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=45 if len(labels) > 8 else 0, ha="center")
    ax.set_ylim(0, 1.05)
    ax.grid(True, axis="y", alpha=0.3)


def cooperation_figure(cooperation: dict[str, dict]) -> plt.Figure:
    """Per-game cooperation rates with CI whiskers, grouped by layer."""
    labels = _sorted_labels(cooperation)
    colors = [
        STABLE_COLOR if FeatureVector.from_string(k).stability else UNSTABLE_COLOR
        for k in labels
    ]
    fig, ax = plt.subplots(figsize=(7, 4))
    _bars_with_ci(ax, labels, cooperation, colors)
    ax.set_xlabel("game")
    ax.set_ylabel("cooperation rate")
    ax.set_title("Within-game cooperation")
    fig.tight_layout()
    return fig


def preference_figure(preference: dict[str, dict]) -> plt.Figure:
    """Per-pair share choosing the feature-added game, with CI whiskers."""
    labels = sorted(preference)
    fig, ax = plt.subplots(figsize=(8, 4))
    _bars_with_ci(ax, labels, preference, "#66ccee")
    ax.axhline(0.5, color="black", linestyle="--", linewidth=1, alpha=0.7)
    ax.set_xlabel("comparison (lower → higher game)")
    ax.set_ylabel("share choosing the higher game")
    ax.set_title("Between-game preference")
    fig.tight_layout()
    return fig


def layer_figure(per_layer: dict[str, float]) -> plt.Figure:
    """Mean cooperation per hypercube layer."""
    layers = sorted(per_layer, key=int)
    values = [per_layer[k] for k in layers]
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.bar(range(len(layers)), values, color=LAYER_COLOR, edgecolor="black", linewidth=0.6)
    ax.set_xticks(range(len(layers)))
    ax.set_xticklabels([f"layer {k}" for k in layers])
    ax.set_ylim(0, 1.05)
    ax.grid(True, axis="y", alpha=0.3)
    ax.set_ylabel("mean cooperation rate")
    ax.set_title("Cooperation by layer")
    fig.tight_layout()
    return fig


def attractor_figure(attractor_counts: dict[str, int]) -> plt.Figure:
    """Where walks end up, across all starting vertices."""
    labels = sorted(attractor_counts)
    values = [attractor_counts[k] for k in labels]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(range(len(labels)), values, color="#aa3377", edgecolor="black", linewidth=0.6)
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels)
    ax.set_xlabel("absorbing vertex")
    ax.set_ylabel("walks absorbed")
    ax.set_title("Walk attractors")
    fig.tight_layout()
    return fig


def save_report_figures(report_doc: dict, out_dir: Path | str) -> list[Path]:
    """Render the standard figures for an analysis document."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if report_doc.get("cooperation"):
        fig = cooperation_figure(report_doc["cooperation"])
        path = out_dir / "cooperation_by_game.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)
    if report_doc.get("preference"):
        fig = preference_figure(report_doc["preference"])
        path = out_dir / "preference_by_pair.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)
    if report_doc.get("cooperation_layers"):
        fig = layer_figure(report_doc["cooperation_layers"])
        path = out_dir / "cooperation_by_layer.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)
    return written
