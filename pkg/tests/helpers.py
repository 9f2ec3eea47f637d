"""Shared builders for tests: random games, synthetic images, study dirs."""

from __future__ import annotations

import itertools
import json
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from copyscope.game import Coalition, Orientation, Player, ValueTable
from copyscope.image_core import Image


def all_coalitions(ids) -> list[Coalition]:
    ids = list(ids)
    out = []
    for r in range(len(ids) + 1):
        for combo in itertools.combinations(ids, r):
            out.append(Coalition.of(combo))
    return out


def random_table(
    rng: np.random.Generator,
    n: int,
    orientation: Orientation = Orientation.LOWER_IS_BETTER,
    low: float = 0.0,
    high: float = 100.0,
) -> ValueTable:
    ids = [f"m{i}" for i in range(n)]
    entries = {c: float(rng.uniform(low, high)) for c in all_coalitions(ids)}
    return ValueTable(
        players=tuple(Player(pid) for pid in ids),
        entries=entries,
        orientation=orientation,
    )


def with_null_player(table: ValueTable, pid: str) -> ValueTable:
    """Copy raw scores so pid never changes any coalition's value."""
    entries = dict(table.entries)
    for c in list(entries):
        if pid in c.members:
            entries[c] = entries[c.without_member(pid)]
    return ValueTable(
        players=table.players,
        entries=entries,
        orientation=table.orientation,
        baseline_label=table.baseline_label,
    )


def with_symmetric_pair(table: ValueTable, pid_a: str, pid_b: str) -> ValueTable:
    """Copy raw scores so pid_a and pid_b are exactly interchangeable."""
    entries = dict(table.entries)
    for c in list(entries):
        if pid_a in c.members and pid_b not in c.members:
            mirrored = c.without_member(pid_a).with_member(pid_b)
            entries[mirrored] = entries[c]
    return ValueTable(
        players=table.players,
        entries=entries,
        orientation=table.orientation,
        baseline_label=table.baseline_label,
    )


def utility_fn(table: ValueTable):
    """Adapter: frozenset of ids -> utility, for the oracle implementations."""

    def u(members: frozenset) -> float:
        return table.utility(Coalition.of(members))

    return u


def raw_fn(table: ValueTable):
    def raw(members: frozenset) -> float:
        return table.raw(Coalition.of(members))

    return raw


def glove_table() -> ValueTable:
    """Three players; a left glove is worth 1 with at least one right glove.

    Raw scores equal utilities (higher is better, baseline 0).
    """
    ids = ["L", "R1", "R2"]
    entries = {}
    for c in all_coalitions(ids):
        members = set(c.members)
        worth = 1.0 if "L" in members and members & {"R1", "R2"} else 0.0
        entries[c] = worth
    return ValueTable(
        players=tuple(Player(pid) for pid in ids),
        entries=entries,
        orientation=Orientation.HIGHER_IS_BETTER,
    )


def additive_table(weights: dict[str, float]) -> ValueTable:
    entries = {}
    for c in all_coalitions(list(weights)):
        entries[c] = float(sum(weights[pid] for pid in c.members))
    return ValueTable(
        players=tuple(Player(pid) for pid in weights),
        entries=entries,
        orientation=Orientation.HIGHER_IS_BETTER,
    )


def random_image(rng: np.random.Generator, h: int = 32, w: int = 32, channels: int = 3) -> Image:
    return Image(rng.integers(0, 256, size=(h, w, channels), dtype=np.uint8))


def write_image_dir(directory: Path, arrays: list[np.ndarray]) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    for i, arr in enumerate(arrays):
        PILImage.fromarray(arr).save(directory / f"img{i:03d}.png")
    return directory


def write_manifest(path: Path, doc: dict) -> Path:
    path.write_text(json.dumps(doc, indent=2), encoding="utf-8")
    return path


def write_table_csv(path: Path, rows: list[tuple[str, float]]) -> Path:
    lines = ["members,value"]
    for members, value in rows:
        field = f'"{members}"' if members == "" else members
        lines.append(f"{field},{value!r}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def table_rows(table: ValueTable) -> list[tuple[str, float]]:
    return [(c.label(), v) for c, v in sorted(table.entries.items(), key=lambda kv: (kv[0].size, kv[0].members))]
