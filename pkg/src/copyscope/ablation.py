"""Dropout analysis: how far does the score drift when one model is removed.

For each player the report averages the raw scores of every nonempty
coalition that excludes the player and compares that mean against the grand
coalition's raw score. A large absolute deviation means the remaining
alliances cannot reproduce the full pipeline's behavior without that model.

Raw scores are averaged directly (not utilities): the analysis reads in the
score's native units, and the empty coalition is excluded because an
alliance of remaining models contains at least one model.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .game import ValueTable


@dataclass(frozen=True)
class AblationReport:
    """Per-player mean score without the player, and its drift from grand."""

    grand_raw: float
    mean_raw_without: Mapping[str, float]
    deviation: Mapping[str, float]
    ranking: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "mean_raw_without", dict(self.mean_raw_without))
        object.__setattr__(self, "deviation", dict(self.deviation))

    def to_dict(self) -> dict:
        return {
            "grand_raw": float(self.grand_raw),
            "mean_raw_without": {k: float(v) for k, v in self.mean_raw_without.items()},
            "deviation": {k: float(v) for k, v in self.deviation.items()},
            "ranking": list(self.ranking),
        }


def ablate(table: ValueTable) -> AblationReport:
    """Average each player's complement coalitions and rank by |deviation|.

    Every mean runs over exactly 2^(N-1) - 1 nonempty subsets of the other
    players, so the table must be complete and have at least two players.
    Ties in |deviation| break by player id ascending.
    """
    table.require_complete()
    n = table.n_players
    if n < 2:
        raise ValueError("ablation needs at least two players")
    raw = table._raw_by_mask
    all_masks = np.arange(1 << n)
    grand_raw = float(raw[-1])
    means: dict[str, float] = {}
    deviations: dict[str, float] = {}
    for i, pid in enumerate(table.player_ids):
        excluded = all_masks[((all_masks >> i) & 1 == 0) & (all_masks != 0)]
        means[pid] = float(raw[excluded].mean())
        deviations[pid] = means[pid] - grand_raw
    ranking = tuple(sorted(deviations, key=lambda pid: (-abs(deviations[pid]), pid)))
    return AblationReport(
        grand_raw=grand_raw,
        mean_raw_without=means,
        deviation=deviations,
        ranking=ranking,
    )
