"""Cooperative-game attribution over model coalitions.

A coalition game assigns each subset of pipeline components (base model
replacement, ControlNet, LoRAs, key prompt) the raw score of the image set
that subset generated. Utilities are anchored at the baseline pipeline so
the empty coalition is worth exactly zero, then each component's
contribution is split out with exact Shapley values, permutation-sampled
Shapley estimates, or leave-one-out margins.

Coalitions are represented internally as bitmasks over the lexicographically
sorted player ids, which keeps exact enumeration O(N * 2^N) in numpy.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import CompletenessError, MissingCoalitionError, SchemaError

MAX_EXACT_PLAYERS = 20
SAMPLING_CHUNK = 4096  # permutations per RNG stream; fixed for determinism


class ComponentKind(str, Enum):
    """The infringement-relevant component families a player can belong to."""

    BASE_MODEL = "BaseModel"
    CONTROL_NET = "ControlNet"
    LORA = "Lora"
    KEY_PROMPT = "KeyPrompt"


class Orientation(str, Enum):
    """Whether smaller or larger raw scores mean closer to the original."""

    LOWER_IS_BETTER = "LowerIsBetter"
    HIGHER_IS_BETTER = "HigherIsBetter"


class AttributionMethod(str, Enum):
    SHAPLEY_EXACT = "ShapleyExact"
    SHAPLEY_SAMPLED = "ShapleySampled"
    LOO = "LOO"


class NormalizeMode(str, Enum):
    SHARE_OF_TOTAL = "ShareOfTotal"
    MIN_MAX = "MinMax"


@dataclass(frozen=True)
class Player:
    """One attributable pipeline component.

    A base-model player means "replace the baseline base model with this
    one", which is what makes the replacement rows of a study table line up
    with ordinary subset semantics.
    """

    id: str
    component_kind: ComponentKind | None = None

    def __post_init__(self):
        if not self.id:
            raise ValueError("player id must be nonempty")
        if any(ch in self.id for ch in ";,\n\r"):
            raise ValueError(f"player id {self.id!r} contains a reserved character")


@dataclass(frozen=True)
class Coalition:
    """A canonically sorted, duplicate-free set of player ids."""

    members: tuple[str, ...]

    def __post_init__(self):
        members = tuple(self.members)
        if len(set(members)) != len(members):
            raise ValueError(f"duplicate member in coalition {members}")
        object.__setattr__(self, "members", tuple(sorted(members)))

    @classmethod
    def of(cls, members: Iterable[str]) -> "Coalition":
        return cls(tuple(members))

    @property
    def size(self) -> int:
        return len(self.members)

    def with_member(self, player_id: str) -> "Coalition":
        return Coalition(self.members + (player_id,))

    def without_member(self, player_id: str) -> "Coalition":
        return Coalition(tuple(m for m in self.members if m != player_id))

    def label(self) -> str:
        return ";".join(self.members)

    def __str__(self) -> str:
        return self.label() or "(baseline)"


@dataclass(frozen=True)
class ValueTable:
    """Raw scores per coalition plus the orientation that turns them into
    utilities.

    U(c) = raw(empty) - raw(c) when lower raw scores are better (distances),
    raw(c) - raw(empty) otherwise, so U(empty) = 0 exactly either way. The
    table may be partial at construction; exact enumeration requires the
    full power set and checks it, lookups raise on absent coalitions.
    """

    players: tuple[Player, ...]
    entries: Mapping[Coalition, float]
    orientation: Orientation = Orientation.LOWER_IS_BETTER
    baseline_label: str = "baseline"

    def __post_init__(self):
        players = tuple(sorted(self.players, key=lambda p: p.id))
        ids = [p.id for p in players]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate player ids: {ids}")
        if not players:
            raise ValueError("a game needs at least one player")
        known = set(ids)
        entries: dict[Coalition, float] = {}
        for coalition, raw in dict(self.entries).items():
            if not isinstance(coalition, Coalition):
                coalition = Coalition.of(coalition)
            stray = set(coalition.members) - known
            if stray:
                raise SchemaError(
                    f"coalition {coalition} references unknown players {sorted(stray)}"
                )
            raw = float(raw)
            if not math.isfinite(raw):
                raise SchemaError(f"coalition {coalition} has non-finite score {raw}")
            entries[coalition] = raw
        object.__setattr__(self, "players", players)
        object.__setattr__(self, "entries", entries)

    @property
    def n_players(self) -> int:
        return len(self.players)

    @property
    def player_ids(self) -> tuple[str, ...]:
        return tuple(p.id for p in self.players)

    @property
    def grand(self) -> Coalition:
        return Coalition(self.player_ids)

    @property
    def empty(self) -> Coalition:
        return Coalition(())

    def raw(self, coalition: Coalition) -> float:
        try:
            return self.entries[coalition]
        except KeyError:
            raise MissingCoalitionError(
                f"coalition {coalition} has no entry in the value table"
            ) from None

    def utility(self, coalition: Coalition) -> float:
        if coalition.size == 0:
            return 0.0
        baseline = self.raw(self.empty)
        raw = self.raw(coalition)
        if self.orientation is Orientation.LOWER_IS_BETTER:
            return baseline - raw
        return raw - baseline

    def missing_coalitions(self) -> list[Coalition]:
        ids = self.player_ids
        missing = []
        for mask in range(1 << len(ids)):
            c = _coalition_from_mask(mask, ids)
            if c not in self.entries:
                missing.append(c)
        return missing

    def require_complete(self) -> None:
        missing = self.missing_coalitions()
        if missing:
            shown = ", ".join(str(c) for c in missing[:8])
            more = f" and {len(missing) - 8} more" if len(missing) > 8 else ""
            raise CompletenessError(
                f"value table is missing {len(missing)} of {1 << self.n_players} "
                f"coalitions: {shown}{more}"
            )

    @cached_property
    def _raw_by_mask(self) -> np.ndarray:
        """Raw scores indexed by member bitmask; NaN marks absent entries."""
        ids = self.player_ids
        arr = np.full(1 << len(ids), np.nan)
        bit = {pid: i for i, pid in enumerate(ids)}
        for coalition, raw in self.entries.items():
            mask = 0
            for m in coalition.members:
                mask |= 1 << bit[m]
            arr[mask] = raw
        return arr

    @cached_property
    def _utility_by_mask(self) -> np.ndarray:
        raw = self._raw_by_mask
        if self.orientation is Orientation.LOWER_IS_BETTER:
            u = raw[0] - raw
        else:
            u = raw - raw[0]
        u[0] = 0.0
        return u


def _coalition_from_mask(mask: int, ids: tuple[str, ...]) -> Coalition:
    return Coalition(tuple(pid for i, pid in enumerate(ids) if mask >> i & 1))


def load_value_table(
    path: str | Path,
    orientation: Orientation = Orientation.LOWER_IS_BETTER,
    baseline_label: str = "baseline",
    players: Iterable[Player] | None = None,
) -> ValueTable:
    """Read a `members,value` CSV into a complete value table.

    The members column is a semicolon-joined list of player ids; the empty
    string is the baseline (empty) coalition. Player ids default to the
    union of all ids seen in the file; pass players explicitly to also
    attach component kinds or to catch typos as unknown-id errors.
    """
    path = Path(path)
    if not path.is_file():
        raise SchemaError(f"value table not found: {path}")
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        if header[:2] != ["members", "value"]:
            raise SchemaError(f"{path}: header must be 'members,value', got {header}")
        rows = [row for row in reader if row]
    entries: dict[Coalition, float] = {}
    seen_ids: set[str] = set()
    for i, row in enumerate(rows):
        if len(row) != 2:
            raise SchemaError(f"{path}: row {i + 2} has {len(row)} fields, expected 2")
        members_field, value_field = row
        member_ids = [m for m in members_field.split(";") if m] if members_field else []
        try:
            coalition = Coalition.of(member_ids)
        except ValueError as exc:
            raise SchemaError(f"{path}: row {i + 2}: {exc}") from None
        if coalition in entries:
            raise SchemaError(f"{path}: duplicate coalition row for {coalition}")
        try:
            value = float(value_field)
        except ValueError:
            raise SchemaError(
                f"{path}: row {i + 2} has non-numeric value {value_field!r}"
            ) from None
        if not math.isfinite(value):
            raise SchemaError(f"{path}: row {i + 2} has non-finite value {value}")
        entries[coalition] = value
        seen_ids.update(member_ids)
    if players is None:
        player_list = tuple(Player(pid) for pid in sorted(seen_ids))
    else:
        player_list = tuple(players)
        known = {p.id for p in player_list}
        stray = seen_ids - known
        if stray:
            raise SchemaError(f"{path}: unknown player ids {sorted(stray)}")
    if not player_list:
        raise SchemaError(f"{path}: no players can be derived from the file")
    table = ValueTable(
        players=player_list,
        entries=entries,
        orientation=orientation,
        baseline_label=baseline_label,
    )
    table.require_complete()
    return table


@dataclass(frozen=True)
class AttributionResult:
    """Per-player contribution values with ranking and provenance."""

    method: AttributionMethod
    values: Mapping[str, float]
    normalized: Mapping[str, float] = field(default_factory=dict)
    ranking: tuple[str, ...] = ()
    stderr: Mapping[str, float] = field(default_factory=dict)
    metadata: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        values = dict(self.values)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "normalized", dict(self.normalized))
        object.__setattr__(self, "stderr", dict(self.stderr))
        object.__setattr__(self, "metadata", dict(self.metadata))
        if not self.ranking:
            object.__setattr__(self, "ranking", rank_players(values))

    def to_dict(self) -> dict:
        out = {
            "method": self.method.value,
            "values": {k: float(v) for k, v in self.values.items()},
            "normalized": {k: float(v) for k, v in self.normalized.items()},
            "ranking": list(self.ranking),
            "metadata": dict(self.metadata),
        }
        if self.stderr:
            out["stderr"] = {k: float(v) for k, v in self.stderr.items()}
        return out


def rank_players(values: Mapping[str, float]) -> tuple[str, ...]:
    """Player ids by value descending, ties broken by id ascending."""
    return tuple(sorted(values, key=lambda pid: (-values[pid], pid)))


def _dense_utilities(table: ValueTable) -> np.ndarray:
    table.require_complete()
    return table._utility_by_mask


def _shapley_weights(n: int) -> np.ndarray:
    """weight(s) = s! (n-1-s)! / n! for a coalition of size s joined next."""
    f = math.factorial
    return np.array(
        [float(Fraction(f(s) * f(n - 1 - s), f(n))) for s in range(n)], dtype=np.float64
    )


def shapley_exact(table: ValueTable) -> AttributionResult:
    """Exact Shapley attribution by power-set enumeration.

    v(z) = sum over coalitions L not containing z of
    [U(L + z) - U(L)] * |L|! (N-1-|L|)! / N!. Enumerating instead the
    coalitions that contain z with margin U(L) - U(L - z) is the same sum
    reindexed; tests hold both forms to exact agreement.
    """
    n = table.n_players
    if n > MAX_EXACT_PLAYERS:
        raise ValueError(
            f"exact enumeration is capped at {MAX_EXACT_PLAYERS} players, got {n}"
        )
    u = _dense_utilities(table)
    weights = _shapley_weights(n)
    all_masks = np.arange(1 << n)
    sizes = np.array([m.bit_count() for m in range(1 << n)])
    values: dict[str, float] = {}
    for i, pid in enumerate(table.player_ids):
        without = all_masks[(all_masks >> i) & 1 == 0]
        margins = u[without | (1 << i)] - u[without]
        values[pid] = float(margins @ weights[sizes[without]])
    return AttributionResult(
        method=AttributionMethod.SHAPLEY_EXACT,
        values=values,
        metadata={"orientation": table.orientation.value},
    )


def _sample_chunk(
    u: np.ndarray, n: int, seed: int, chunk_index: int, count: int
) -> tuple[np.ndarray, np.ndarray]:
    """Margin sums and squared sums for one fixed-size permutation stream.

    Each chunk owns an independent counter-based RNG keyed by (seed, chunk
    index), so the estimate depends only on the seed and permutation count,
    never on how chunks are scheduled across workers.
    """
    key = np.array([seed & (2**64 - 1), chunk_index], dtype=np.uint64)
    rng = np.random.Generator(np.random.Philox(key=key))
    sums = np.zeros(n)
    sumsq = np.zeros(n)
    for _ in range(count):
        mask = 0
        u_prev = 0.0
        for p in rng.permutation(n):
            mask |= 1 << p
            u_next = u[mask]
            if math.isnan(u_next):
                raise MissingCoalitionError(
                    "sampled permutation visited a coalition with no table entry"
                )
            margin = u_next - u_prev
            sums[p] += margin
            sumsq[p] += margin * margin
            u_prev = u_next
    return sums, sumsq


def shapley_sampled(
    table: ValueTable, permutations: int, seed: int, workers: int = 1
) -> AttributionResult:
    """Monte Carlo Shapley: average marginal contribution over sampled
    player orderings.

    Unbiased for the exact values; the per-player standard error shrinks
    as 1/sqrt(permutations). Deterministic for a fixed seed regardless of
    worker count: permutations are split into fixed-size chunks with
    per-chunk RNG streams and the partial sums are combined in chunk order.
    """
    if permutations < 1:
        raise ValueError(f"permutation count must be >= 1, got {permutations}")
    n = table.n_players
    u = table._utility_by_mask
    if math.isnan(u[0]):
        raise MissingCoalitionError("value table has no baseline (empty coalition) row")
    counts = [
        min(SAMPLING_CHUNK, permutations - start)
        for start in range(0, permutations, SAMPLING_CHUNK)
    ]
    jobs = [(u, n, seed, idx, cnt) for idx, cnt in enumerate(counts)]
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda args: _sample_chunk(*args), jobs))
    else:
        parts = [_sample_chunk(*args) for args in jobs]
    sums = np.zeros(n)
    sumsq = np.zeros(n)
    for part_sums, part_sumsq in parts:  # fixed order: bit-identical totals
        sums += part_sums
        sumsq += part_sumsq
    estimates = sums / permutations
    if permutations > 1:
        variance = np.maximum(sumsq - sums * sums / permutations, 0.0) / (permutations - 1)
        stderr = np.sqrt(variance / permutations)
    else:
        stderr = np.zeros(n)
    ids = table.player_ids
    return AttributionResult(
        method=AttributionMethod.SHAPLEY_SAMPLED,
        values={pid: float(estimates[i]) for i, pid in enumerate(ids)},
        stderr={pid: float(stderr[i]) for i, pid in enumerate(ids)},
        metadata={
            "orientation": table.orientation.value,
            "seed": int(seed),
            "permutations": int(permutations),
            "chunk_size": SAMPLING_CHUNK,
        },
    )


def loo(table: ValueTable) -> AttributionResult:
    """Leave-one-out attribution: v(z) = U(all players) - U(all but z).

    Needs only the grand coalition, its leave-one-out subsets, and the
    baseline row, so it works on tables far short of the full power set.
    """
    grand = table.grand
    u_grand = table.utility(grand)
    values = {
        pid: u_grand - table.utility(grand.without_member(pid))
        for pid in table.player_ids
    }
    return AttributionResult(
        method=AttributionMethod.LOO,
        values=values,
        metadata={"orientation": table.orientation.value},
    )


def normalize(result: AttributionResult, mode: NormalizeMode) -> AttributionResult:
    """Fill the normalized map; ranking and raw values pass through.

    ShareOfTotal (v / sum v) only makes sense when every value has the
    same sign and the total is nonzero; otherwise it falls back to MinMax
    and flags the fallback. MinMax maps a constant vector to all zeros and
    flags it as degenerate.
    """
    ids = list(result.values)
    vals = np.array([result.values[pid] for pid in ids], dtype=np.float64)
    fallback = False
    if mode is NormalizeMode.SHARE_OF_TOTAL:
        total = float(vals.sum())
        if (np.all(vals >= 0.0) or np.all(vals <= 0.0)) and total != 0.0:
            return _with_normalized(result, ids, vals / total, mode, False, False)
        fallback = True
    lo, hi = float(vals.min()), float(vals.max())
    if hi == lo:
        return _with_normalized(result, ids, np.zeros_like(vals), NormalizeMode.MIN_MAX, fallback, True)
    return _with_normalized(result, ids, (vals - lo) / (hi - lo), NormalizeMode.MIN_MAX, fallback, False)


def _with_normalized(
    result: AttributionResult,
    ids: list[str],
    normalized: np.ndarray,
    mode_used: NormalizeMode,
    fallback: bool,
    degenerate: bool,
) -> AttributionResult:
    metadata = dict(result.metadata)
    metadata["normalize_mode"] = mode_used.value
    metadata["normalize_fallback"] = fallback
    metadata["normalize_degenerate"] = degenerate
    return AttributionResult(
        method=result.method,
        values=result.values,
        normalized={pid: float(x) for pid, x in zip(ids, normalized)},
        ranking=result.ranking,
        stderr=result.stderr,
        metadata=metadata,
    )


@dataclass(frozen=True)
class AxiomReport:
    """Outcome of checking the four Shapley axioms against a result.

    Null players and symmetric pairs are detected by exact raw-score
    equality over the power set, so only constructed (bit-identical)
    structure is flagged; measured near-ties are not.
    """

    efficiency_ok: bool
    efficiency_gap: float
    null_players: tuple[str, ...]
    null_ok: bool
    null_max_abs: float
    symmetric_pairs: tuple[tuple[str, str], ...]
    symmetry_ok: bool
    symmetry_max_gap: float
    additivity_ok: bool | None = None
    additivity_max_gap: float | None = None

    @property
    def ok(self) -> bool:
        checks = [self.efficiency_ok, self.null_ok, self.symmetry_ok]
        if self.additivity_ok is not None:
            checks.append(self.additivity_ok)
        return all(checks)

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "efficiency_ok": self.efficiency_ok,
            "efficiency_gap": self.efficiency_gap,
            "null_players": list(self.null_players),
            "null_ok": self.null_ok,
            "null_max_abs": self.null_max_abs,
            "symmetric_pairs": [list(p) for p in self.symmetric_pairs],
            "symmetry_ok": self.symmetry_ok,
            "symmetry_max_gap": self.symmetry_max_gap,
            "additivity_ok": self.additivity_ok,
            "additivity_max_gap": self.additivity_max_gap,
        }


EFFICIENCY_REL_TOL = 1e-9
NULL_PLAYER_TOL = 1e-12
SYMMETRY_TOL = 1e-12
ADDITIVITY_TOL = 1e-9


def check_axioms(
    table: ValueTable,
    result: AttributionResult,
    other: ValueTable | None = None,
) -> AxiomReport:
    """Verify efficiency, null-player, symmetry and (optionally) additivity.

    The result must come from exact Shapley on this table. Additivity is
    checked when a second table over the same players and orientation is
    supplied: the summed game's raw scores are the elementwise sums, and
    its exact values must equal the sum of the two per-table values.
    """
    if result.method is not AttributionMethod.SHAPLEY_EXACT:
        raise ValueError(f"axiom checks need an exact Shapley result, got {result.method.value}")
    ids = table.player_ids
    if tuple(sorted(result.values)) != ids:
        raise ValueError("result players do not match the table's players")
    u = _dense_utilities(table)
    n = len(ids)
    all_masks = np.arange(1 << n)

    u_grand = float(u[-1])
    total = math.fsum(result.values[pid] for pid in ids)
    efficiency_gap = abs(total - u_grand)
    efficiency_ok = efficiency_gap <= EFFICIENCY_REL_TOL * max(1.0, abs(u_grand))

    raw = table._raw_by_mask
    null_players = []
    null_max = 0.0
    for i, pid in enumerate(ids):
        without = all_masks[(all_masks >> i) & 1 == 0]
        if np.array_equal(raw[without | (1 << i)], raw[without]):
            null_players.append(pid)
            null_max = max(null_max, abs(result.values[pid]))
    null_ok = null_max <= NULL_PLAYER_TOL

    symmetric_pairs = []
    sym_max = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            both_clear = all_masks[
                ((all_masks >> i) & 1 == 0) & ((all_masks >> j) & 1 == 0)
            ]
            if np.array_equal(raw[both_clear | (1 << i)], raw[both_clear | (1 << j)]):
                symmetric_pairs.append((ids[i], ids[j]))
                sym_max = max(sym_max, abs(result.values[ids[i]] - result.values[ids[j]]))
    symmetry_ok = sym_max <= SYMMETRY_TOL

    additivity_ok = None
    additivity_max = None
    if other is not None:
        if other.player_ids != ids:
            raise ValueError("additivity check needs two tables over the same players")
        if other.orientation is not table.orientation:
            raise ValueError("additivity check needs matching orientations")
        other.require_complete()
        summed = ValueTable(
            players=table.players,
            entries={
                _coalition_from_mask(m, ids): float(raw[m] + other._raw_by_mask[m])
                for m in range(1 << n)
            },
            orientation=table.orientation,
            baseline_label=table.baseline_label,
        )
        v_other = shapley_exact(other).values
        v_sum = shapley_exact(summed).values
        gaps = [
            abs(v_sum[pid] - (result.values[pid] + v_other[pid])) for pid in ids
        ]
        additivity_max = max(gaps)
        scale = max(1.0, max(abs(v) for v in v_sum.values()))
        additivity_ok = additivity_max <= ADDITIVITY_TOL * scale

    return AxiomReport(
        efficiency_ok=efficiency_ok,
        efficiency_gap=efficiency_gap,
        null_players=tuple(null_players),
        null_ok=null_ok,
        null_max_abs=null_max,
        symmetric_pairs=tuple(symmetric_pairs),
        symmetry_ok=symmetry_ok,
        symmetry_max_gap=sym_max,
        additivity_ok=additivity_ok,
        additivity_max_gap=additivity_max,
    )
