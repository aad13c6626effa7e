"""Report rendering: delimited text outputs with matplotlib figures alongside.

Used by the CLI's stats, eval, and mine report paths. Figures are rendered
with the Agg backend so reporting works headless.
"""

from __future__ import annotations

import json
import logging
import os
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .evaluation import MetricsReport  # noqa: E402
from .mining import Pattern, sort_patterns  # noqa: E402
from .store import atomic_write_text  # noqa: E402

logger = logging.getLogger(__name__)

_TOP_LABELS = 25
_TOP_PATTERNS = 20


def _save_figure(fig, path: Path) -> None:
    tmp = path.with_name(path.name + ".part")
    fig.savefig(tmp, format=path.suffix.lstrip(".") or "png", bbox_inches="tight", dpi=120)
    plt.close(fig)
    os.replace(tmp, path)


def write_stats_report(stats: dict, outdir: str | Path) -> list[Path]:
    """Write stats.tsv, label_frequencies.tsv, and the three corpus figures."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    rows = [
        ("count", stats["count"]),
        ("mean_len", f"{stats['mean_len']:.4f}"),
        ("below_min_len", stats.get("below_min_len", 0)),
    ]
    rows.extend((f"len_{k}", v) for k, v in stats["len_histogram"].items())
    rows.extend((f"termination_{k}", v) for k, v in stats["terminations"].items())
    stats_path = outdir / "stats.tsv"
    atomic_write_text(str(stats_path), "".join(f"{k}\t{v}\n" for k, v in rows))
    written.append(stats_path)

    frequencies = sorted(stats["label_frequencies"].items(), key=lambda kv: (-kv[1], kv[0]))
    freq_path = outdir / "label_frequencies.tsv"
    atomic_write_text(str(freq_path), "".join(f"{k}\t{v}\n" for k, v in frequencies))
    written.append(freq_path)

    if stats["len_histogram"]:
        fig, ax = plt.subplots(figsize=(6, 4))
        lengths = sorted(stats["len_histogram"])
        ax.bar(lengths, [stats["len_histogram"][n] for n in lengths], color="#4878a8")
        ax.set_xlabel("sequence length")
        ax.set_ylabel("sequences")
        ax.set_title("Sequence length distribution")
        path = outdir / "length_histogram.png"
        _save_figure(fig, path)
        written.append(path)

    if frequencies:
        top = frequencies[:_TOP_LABELS]
        fig, ax = plt.subplots(figsize=(7, max(3, 0.3 * len(top))))
        ax.barh([k for k, _ in reversed(top)], [v for _, v in reversed(top)], color="#6aa84f")
        ax.set_xlabel("occurrences")
        ax.set_title(f"Top {len(top)} labels")
        path = outdir / "label_frequencies.png"
        _save_figure(fig, path)
        written.append(path)

    if stats["terminations"]:
        fig, ax = plt.subplots(figsize=(5, 3.5))
        keys = sorted(stats["terminations"])
        ax.bar(keys, [stats["terminations"][k] for k in keys], color="#b45f5f")
        ax.set_ylabel("sequences")
        ax.set_title("Termination reasons")
        fig.autofmt_xdate(rotation=20)
        path = outdir / "terminations.png"
        _save_figure(fig, path)
        written.append(path)

    return written


def write_metrics_report(report: MetricsReport, outdir: str | Path) -> list[Path]:
    """Write metrics.txt (flat key-value block), metrics.json, and a bar figure."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    lines = []
    for name, value in (("precision", report.precision), ("recall", report.recall), ("f1", report.f1)):
        lines.append(f"{name}\t{'' if value is None else f'{value:.4f}'}")
    for key, value in sorted(report.counts.items()):
        formatted = f"{value:.4f}" if isinstance(value, float) else value
        lines.append(f"{key}\t{formatted}")
    txt_path = outdir / "metrics.txt"
    atomic_write_text(str(txt_path), "\n".join(lines) + "\n")
    written.append(txt_path)

    json_path = outdir / "metrics.json"
    atomic_write_text(str(json_path), json.dumps(report.as_dict(), ensure_ascii=False, indent=2) + "\n")
    written.append(json_path)

    bars = {
        name: value
        for name, value in (("precision", report.precision), ("recall", report.recall), ("f1", report.f1))
        if value is not None
    }
    if bars:
        fig, ax = plt.subplots(figsize=(5, 3.5))
        ax.bar(list(bars), list(bars.values()), color=["#4878a8", "#6aa84f", "#b45f5f"][: len(bars)])
        ax.set_ylim(0, 1)
        ax.set_title("Corpus quality metrics")
        for i, value in enumerate(bars.values()):
            ax.text(i, value + 0.02, f"{value:.2f}", ha="center")
        path = outdir / "metrics.png"
        _save_figure(fig, path)
        written.append(path)

    return written


def write_pattern_figure(mined: dict[Pattern, int], path: str | Path) -> Path | None:
    """Horizontal bar chart of the top mined patterns by support."""
    top = sort_patterns(mined)[:_TOP_PATTERNS]
    if not top:
        return None
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = [" -> ".join(p.labels) for p in top]
    fig, ax = plt.subplots(figsize=(8, max(3, 0.35 * len(top))))
    ax.barh(list(reversed(names)), [p.support for p in reversed(top)], color="#4878a8")
    ax.set_xlabel("support")
    ax.set_title(f"Top {len(top)} mined patterns")
    _save_figure(fig, path)
    return path
