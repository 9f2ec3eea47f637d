"""Report persistence: delimited tables, JSON documents, and figures.

Every JSON body embeds the toolkit version and the full run configuration
and contains no timestamps, so re-running a command with the same inputs
and configuration writes byte-identical files. JSON keys are sorted for
the same reason. CSVs carry only the tabular data; the JSON twin holds
the provenance.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .ablation import AblationReport
from .game import AttributionResult, AxiomReport, Orientation, ValueTable
from .manifest import RunConfig
from .metrics import MetricReport
from .version import __version__

# Table column order and score direction for the metric suite: the five
# similarities grow toward 1, the distance shrinks toward 0.
METRIC_COLUMNS = ("cosine", "hist", "dhash", "ssim", "rgb_ssim", "fid")
METRIC_ORIENTATION = {
    "cosine": Orientation.HIGHER_IS_BETTER.value,
    "hist": Orientation.HIGHER_IS_BETTER.value,
    "dhash": Orientation.HIGHER_IS_BETTER.value,
    "ssim": Orientation.HIGHER_IS_BETTER.value,
    "rgb_ssim": Orientation.HIGHER_IS_BETTER.value,
    "fid": Orientation.LOWER_IS_BETTER.value,
}


def write_json(payload: dict, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _provenance(config: RunConfig) -> dict:
    return {"version": __version__, "config": config.to_dict()}


def metrics_payload(rows: Sequence[MetricReport], config: RunConfig) -> dict:
    return {
        **_provenance(config),
        "columns": list(METRIC_COLUMNS),
        "orientation": dict(METRIC_ORIENTATION),
        "rows": [
            {"label": r.coalition_label, **r.scores(), "metadata": dict(r.metadata)}
            for r in rows
        ],
    }


def write_metrics_csv(rows: Sequence[MetricReport], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label", *METRIC_COLUMNS])
        for r in rows:
            scores = r.scores()
            writer.writerow(
                [r.coalition_label] + [repr(scores[c]) for c in METRIC_COLUMNS]
            )


def attribution_payload(
    results: Mapping[str, AttributionResult],
    table: ValueTable,
    config: RunConfig,
    axioms: AxiomReport | None = None,
) -> dict:
    return {
        **_provenance(config),
        "orientation": table.orientation.value,
        "baseline_label": table.baseline_label,
        "players": list(table.player_ids),
        "utility_grand": float(table.utility(table.grand)),
        "results": {name: r.to_dict() for name, r in results.items()},
        "axioms": axioms.to_dict() if axioms is not None else None,
    }


def write_attribution_csv(
    results: Mapping[str, AttributionResult], path: str | Path
) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "player", "rank", "value", "normalized", "stderr"])
        for name in sorted(results):
            r = results[name]
            for rank, pid in enumerate(r.ranking, start=1):
                writer.writerow(
                    [
                        name,
                        pid,
                        rank,
                        repr(r.values[pid]),
                        repr(r.normalized[pid]) if pid in r.normalized else "",
                        repr(r.stderr[pid]) if pid in r.stderr else "",
                    ]
                )


def ablation_payload(
    report: AblationReport, table: ValueTable, config: RunConfig
) -> dict:
    return {
        **_provenance(config),
        "baseline_label": table.baseline_label,
        "players": list(table.player_ids),
        "empty_coalition_included": False,
        **report.to_dict(),
    }


def write_ablation_csv(report: AblationReport, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["player", "rank", "mean_raw_without", "deviation"])
        for rank, pid in enumerate(report.ranking, start=1):
            writer.writerow(
                [pid, rank, repr(report.mean_raw_without[pid]), repr(report.deviation[pid])]
            )


def attribution_figure(
    results: Mapping[str, AttributionResult], path: str | Path
) -> None:
    """Grouped bars comparing normalized contributions across methods."""
    names = sorted(results)
    players = sorted({pid for r in results.values() for pid in r.values})
    width = 0.8 / max(1, len(names))
    fig, ax = plt.subplots(figsize=(1.8 * max(4, len(players)), 4.5))
    for k, name in enumerate(names):
        r = results[name]
        heights = [r.normalized.get(pid, r.values.get(pid, 0.0)) for pid in players]
        offsets = [i + (k - (len(names) - 1) / 2) * width for i in range(len(players))]
        ax.bar(offsets, heights, width=width, label=name)
    ax.set_xticks(range(len(players)))
    ax.set_xticklabels(players, rotation=20, ha="right")
    ax.set_ylabel("normalized contribution")
    ax.set_title("Per-model contribution by attribution method")
    ax.axhline(0.0, color="black", linewidth=0.8)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def ablation_figure(report: AblationReport, path: str | Path) -> None:
    """Mean score of the remaining alliances per dropped model."""
    players = list(report.ranking)
    heights = [report.mean_raw_without[pid] for pid in players]
    fig, ax = plt.subplots(figsize=(1.8 * max(4, len(players)), 4.5))
    ax.bar(range(len(players)), heights, color="tab:orange")
    ax.axhline(
        report.grand_raw,
        color="black",
        linestyle="--",
        linewidth=1.0,
        label=f"all models ({report.grand_raw:g})",
    )
    ax.set_xticks(range(len(players)))
    ax.set_xticklabels(players, rotation=20, ha="right")
    ax.set_ylabel("mean score without model")
    ax.set_title("Dropout deviation per model")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
