"""Study manifests and run configuration.

A manifest is the single source of truth for a study: the players (with
their component kinds), the baseline pipeline label, where the original
images live, and one entry per generated coalition pointing at either an
image directory or an exported feature file. Keeping player declarations
and data locations in one JSON document prevents value tables and image
sets from drifting apart.

The run configuration carries every knob that affects numbers (metric
resolution, SSIM parameters, FID regularization, normalization mode, seed,
permutation count, output directory) and is embedded verbatim in every
report so results remain reproducible from the report alone.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

from .errors import ConfigError, DatasetError, SchemaError
from .fid import FeatureSet, features_from_images
from .game import (
    Coalition,
    ComponentKind,
    Orientation,
    Player,
    NormalizeMode,
    ValueTable,
)
from .image_core import ImageSet, load_image_set
from .interchange import read_features
from .metrics import DEFAULT_RESOLUTION, SsimParams

OUTPUT_DIR_ENV = "COPYSCOPE_OUT"


class FeatureSourceKind(str, Enum):
    """How coalition data turns into FID feature vectors."""

    BUILTIN_PIXEL = "BuiltinPixel"
    EXTERNAL = "External"


@dataclass(frozen=True)
class DataSource:
    """Where one image set lives: a directory of images or a feature file."""

    image_dir: Path | None = None
    feature_file: Path | None = None

    def __post_init__(self):
        if (self.image_dir is None) == (self.feature_file is None):
            raise SchemaError("exactly one of image_dir or feature_file must be set")


@dataclass(frozen=True)
class CoalitionEntry:
    """One generated image set and the player subset that produced it."""

    label: str
    members: Coalition
    source: DataSource


@dataclass(frozen=True)
class CoalitionManifest:
    players: tuple[Player, ...]
    baseline_label: str
    original: DataSource
    coalitions: tuple[CoalitionEntry, ...]
    feature_source: FeatureSourceKind = FeatureSourceKind.BUILTIN_PIXEL

    def __post_init__(self):
        ids = {p.id for p in self.players}
        if len(ids) != len(self.players):
            raise SchemaError("duplicate player ids in manifest")
        labels = [c.label for c in self.coalitions]
        if len(set(labels)) != len(labels):
            dupes = sorted({x for x in labels if labels.count(x) > 1})
            raise SchemaError(f"duplicate coalition labels in manifest: {dupes}")
        for entry in self.coalitions:
            stray = set(entry.members.members) - ids
            if stray:
                raise SchemaError(
                    f"coalition {entry.label!r} references unknown players {sorted(stray)}"
                )
        if not any(entry.members.size == 0 for entry in self.coalitions):
            raise SchemaError(
                "manifest needs a baseline entry (empty members) so utilities "
                "can be anchored at the baseline pipeline"
            )


def load_manifest(path: str | Path) -> CoalitionManifest:
    """Parse and validate a manifest JSON file.

    Relative data paths are resolved against the manifest's directory, so a
    study folder can move as a unit.
    """
    path = Path(path)
    if not path.is_file():
        raise SchemaError(f"manifest not found: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise SchemaError(f"{path}: top level must be a JSON object")
    root = path.parent

    def _source(obj: object, where: str) -> DataSource:
        if not isinstance(obj, dict):
            raise SchemaError(f"{path}: {where} must be an object")
        image_dir = obj.get("image_dir")
        feature_file = obj.get("feature_file")
        if (image_dir is None) == (feature_file is None):
            raise SchemaError(
                f"{path}: {where} needs exactly one of image_dir or feature_file"
            )
        if image_dir is not None:
            return DataSource(image_dir=root / str(image_dir))
        return DataSource(feature_file=root / str(feature_file))

    players = []
    for item in _require(doc, "players", list, path):
        if not isinstance(item, dict) or "id" not in item:
            raise SchemaError(f"{path}: each player needs at least an 'id' field")
        kind_name = item.get("component_kind")
        kind = None
        if kind_name is not None:
            try:
                kind = ComponentKind(kind_name)
            except ValueError:
                valid = [k.value for k in ComponentKind]
                raise SchemaError(
                    f"{path}: player {item['id']!r} has unknown component_kind "
                    f"{kind_name!r}; expected one of {valid}"
                ) from None
        try:
            players.append(Player(id=str(item["id"]), component_kind=kind))
        except ValueError as exc:
            raise SchemaError(f"{path}: {exc}") from None

    coalitions = []
    for i, item in enumerate(_require(doc, "coalitions", list, path)):
        if not isinstance(item, dict):
            raise SchemaError(f"{path}: coalition {i} must be an object")
        label = item.get("label")
        if not label or not isinstance(label, str):
            raise SchemaError(f"{path}: coalition {i} needs a nonempty label")
        members_raw = item.get("members")
        if not isinstance(members_raw, list):
            raise SchemaError(f"{path}: coalition {label!r} needs a members list")
        try:
            members = Coalition.of(str(m) for m in members_raw)
        except ValueError as exc:
            raise SchemaError(f"{path}: coalition {label!r}: {exc}") from None
        coalitions.append(
            CoalitionEntry(
                label=label,
                members=members,
                source=_source(item, f"coalition {label!r}"),
            )
        )

    source_name = doc.get("feature_source", FeatureSourceKind.BUILTIN_PIXEL.value)
    try:
        feature_source = FeatureSourceKind(source_name)
    except ValueError:
        valid = [k.value for k in FeatureSourceKind]
        raise SchemaError(
            f"{path}: feature_source {source_name!r} must be one of {valid}"
        ) from None

    return CoalitionManifest(
        players=tuple(players),
        baseline_label=str(doc.get("baseline_label", "baseline")),
        original=_source(_require(doc, "original", dict, path), "original"),
        coalitions=tuple(coalitions),
        feature_source=feature_source,
    )


def _require(doc: dict, key: str, typ: type, path: Path):
    value = doc.get(key)
    if not isinstance(value, typ):
        raise SchemaError(f"{path}: required field {key!r} must be a {typ.__name__}")
    return value


@dataclass(frozen=True)
class RunConfig:
    """Everything that influences computed numbers, embedded in reports."""

    resolution: int = DEFAULT_RESOLUTION
    ssim: SsimParams = field(default_factory=SsimParams)
    fid_eps_coeff: float = 1e-6
    norm_mode: NormalizeMode = NormalizeMode.SHARE_OF_TOTAL
    seed: int = 0
    permutations: int = 4096
    out_dir: Path = field(default_factory=lambda: Path(os.environ.get(OUTPUT_DIR_ENV, ".")))

    def __post_init__(self):
        if self.resolution < 8:
            raise ConfigError(f"metric resolution must be >= 8, got {self.resolution}")
        if self.fid_eps_coeff < 0:
            raise ConfigError("FID epsilon coefficient must be >= 0")
        if self.permutations < 1:
            raise ConfigError("permutation count must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must fit in 64 bits")
        object.__setattr__(self, "out_dir", Path(self.out_dir))

    def with_out_dir(self, out_dir: str | Path) -> "RunConfig":
        return replace(self, out_dir=Path(out_dir))

    def to_dict(self) -> dict:
        return {
            "resolution": self.resolution,
            "ssim": {
                "k1": self.ssim.k1,
                "k2": self.ssim.k2,
                "dynamic_range": self.ssim.dynamic_range,
                "window_side": self.ssim.window_side,
                "sigma": self.ssim.sigma,
            },
            "fid_eps_coeff": self.fid_eps_coeff,
            "norm_mode": self.norm_mode.value,
            "seed": self.seed,
            "permutations": self.permutations,
            "out_dir": str(self.out_dir),
        }


def load_entry_images(source: DataSource, label: str) -> ImageSet:
    """Load the image directory behind a source, naming the owner on failure."""
    if source.image_dir is None:
        raise DatasetError(
            f"{label}: pixel metrics need an image directory, but this entry "
            f"only provides a feature file"
        )
    try:
        return load_image_set(source.image_dir)
    except DatasetError as exc:
        raise DatasetError(f"{label}: {exc}") from None


def load_entry_features(
    source: DataSource, label: str, feature_source: FeatureSourceKind
) -> FeatureSet:
    """Resolve a source to FID features according to the manifest's mode."""
    if feature_source is FeatureSourceKind.BUILTIN_PIXEL:
        if source.image_dir is None:
            raise ConfigError(
                f"{label}: feature_source BuiltinPixel needs image directories, "
                f"but this entry provides a feature file; use External instead"
            )
        return features_from_images(load_entry_images(source, label))
    if source.feature_file is None:
        raise ConfigError(
            f"{label}: feature_source External needs exported feature files, "
            f"but this entry provides an image directory"
        )
    try:
        return read_features(source.feature_file)
    except SchemaError as exc:
        raise SchemaError(f"{label}: {exc}") from None


def value_table_from_manifest(
    manifest: CoalitionManifest, config: RunConfig
) -> ValueTable:
    """Score every coalition against the original set and build the game.

    The raw score is the Frechet distance between the original's feature
    distribution and each coalition's, so the resulting table is
    lower-is-better and anchored at the manifest's baseline entry.
    """
    from .fid import fid, fit_gaussian

    original = load_entry_features(manifest.original, "original", manifest.feature_source)
    original_stats = fit_gaussian(original)
    entries: dict[Coalition, float] = {}
    for entry in manifest.coalitions:
        features = load_entry_features(entry.source, entry.label, manifest.feature_source)
        if features.d != original.d:
            raise ConfigError(
                f"{entry.label}: feature dimension {features.d} does not match "
                f"the original's {original.d}"
            )
        if entry.members in entries:
            raise SchemaError(
                f"coalition {entry.label!r} duplicates the member set "
                f"{entry.members} of an earlier entry"
            )
        entries[entry.members] = fid(
            original_stats, fit_gaussian(features), config.fid_eps_coeff
        )
    return ValueTable(
        players=manifest.players,
        entries=entries,
        orientation=Orientation.LOWER_IS_BETTER,
        baseline_label=manifest.baseline_label,
    )
