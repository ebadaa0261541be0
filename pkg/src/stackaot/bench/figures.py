"""Matplotlib figures for benchmark reports, written as PNG files."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from ..isa import CATEGORIES  # noqa: E402
from .harness import SuiteResult  # noqa: E402


def ladder_figure(result: SuiteResult, path: Path) -> Path:
    """Cycles at each level, normalised to the first level, one group per benchmark."""
    benches = result.benches
    labels = [m.label for m in benches[0].levels]
    width = 0.8 / len(labels)
    fig, ax = plt.subplots(figsize=(max(6, 1.3 * len(benches)), 4))
    for k, label in enumerate(labels):
        xs = [i + k * width for i in range(len(benches))]
        ys = [b.levels[k].cycles / b.levels[0].cycles for b in benches]
        ax.bar(xs, ys, width, label=label)
    ax.set_xticks([i + 0.4 - width / 2 for i in range(len(benches))])
    ax.set_xticklabels([b.name for b in benches])
    ax.set_ylabel(f"cycles relative to {labels[0]}")
    ax.legend(fontsize="small")
    ax.set_title("Optimisation ladder")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def category_figure(result: SuiteResult, path: Path) -> Path:
    """Stacked category cycles at the first and last level, relative to the reference."""
    benches = result.benches
    first, last = benches[0].levels[0].label, benches[0].levels[-1].label
    fig, ax = plt.subplots(figsize=(max(6, 1.3 * len(benches)), 4))
    for i, b in enumerate(benches):
        ref = b.reference.cycles
        for off, m in ((-0.2, b.levels[0]), (0.2, b.levels[-1])):
            bottom = 0.0
            for k, c in enumerate(CATEGORIES):
                v = m.categories[c] / ref
                ax.bar(i + off, v, 0.35, bottom=bottom, color=f"C{k}",
                       label=c if i == 0 and off < 0 else None)
                bottom += v
    ax.set_xticks(range(len(benches)))
    ax.set_xticklabels([f"{b.name}\n({b.reference_label})" for b in benches], fontsize="small")
    ax.set_ylabel("cycles / reference cycles")
    ax.set_title(f"Cycles by category: {first} (left) vs {last} (right)")
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def sweep_figure(result: SuiteResult, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    for b in result.benches:
        if not b.sweep:
            continue
        caps = sorted(b.sweep)
        base = b.sweep[caps[0]]
        ax.plot(caps, [b.sweep[c] / base for c in caps], marker="o", label=b.name)
    ax.set_xlabel("pinned register pairs (cap)")
    ax.set_ylabel("cycles relative to cap 1")
    ax.set_title("Mark-loops pin-cap sweep")
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def write_figures(result: SuiteResult, stem: Path) -> list:
    """Write every applicable figure next to ``stem``; returns the paths."""
    stem = Path(stem)
    out = []
    if not result.benches:
        return out
    out.append(ladder_figure(result, stem.with_name(stem.name + "-ladder.png")))
    out.append(category_figure(result, stem.with_name(stem.name + "-categories.png")))
    if any(b.sweep for b in result.benches):
        out.append(sweep_figure(result, stem.with_name(stem.name + "-sweep.png")))
    return out
