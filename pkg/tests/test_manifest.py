import json

import numpy as np
import pytest

from copyscope.errors import ConfigError, DatasetError, SchemaError
from copyscope.fid import FeatureSet, fid, fit_gaussian
from copyscope.game import ComponentKind, NormalizeMode, Orientation
from copyscope.interchange import write_features_binary
from copyscope.manifest import (
    OUTPUT_DIR_ENV,
    CoalitionEntry,
    CoalitionManifest,
    DataSource,
    FeatureSourceKind,
    RunConfig,
    load_entry_features,
    load_entry_images,
    load_manifest,
    value_table_from_manifest,
)
from copyscope.game import Coalition, Player
from helpers import write_image_dir, write_manifest


def study_doc(**overrides):
    doc = {
        "players": [
            {"id": "A", "component_kind": "Lora"},
            {"id": "B", "component_kind": "ControlNet"},
        ],
        "baseline_label": "plain_pipeline",
        "original": {"image_dir": "orig"},
        "coalitions": [
            {"label": "plain_pipeline", "members": [], "image_dir": "c_none"},
            {"label": "with_a", "members": ["A"], "image_dir": "c_a"},
            {"label": "with_b", "members": ["B"], "image_dir": "c_b"},
            {"label": "with_both", "members": ["A", "B"], "image_dir": "c_ab"},
        ],
    }
    doc.update(overrides)
    return doc


def populate_dirs(root, rng, dirs=("orig", "c_none", "c_a", "c_b", "c_ab"), count=3):
    for name in dirs:
        arrays = [rng.integers(0, 256, (12, 12, 3), dtype=np.uint8) for _ in range(count)]
        write_image_dir(root / name, arrays)


class TestDataSource:
    def test_exactly_one_required(self, tmp_path):
        with pytest.raises(SchemaError):
            DataSource()
        with pytest.raises(SchemaError):
            DataSource(image_dir=tmp_path, feature_file=tmp_path / "f.csf")


class TestCoalitionManifestValidation:
    def _entry(self, label, members, tmp_path):
        return CoalitionEntry(
            label=label,
            members=Coalition.of(members),
            source=DataSource(image_dir=tmp_path / label),
        )

    def test_duplicate_player_ids(self, tmp_path):
        with pytest.raises(SchemaError, match="duplicate player"):
            CoalitionManifest(
                players=(Player("A"), Player("A")),
                baseline_label="b",
                original=DataSource(image_dir=tmp_path),
                coalitions=(self._entry("b", [], tmp_path),),
            )

    def test_duplicate_labels(self, tmp_path):
        with pytest.raises(SchemaError, match="duplicate coalition labels"):
            CoalitionManifest(
                players=(Player("A"),),
                baseline_label="b",
                original=DataSource(image_dir=tmp_path),
                coalitions=(
                    self._entry("b", [], tmp_path),
                    CoalitionEntry(
                        label="b",
                        members=Coalition.of(["A"]),
                        source=DataSource(image_dir=tmp_path / "other"),
                    ),
                ),
            )

    def test_unknown_members(self, tmp_path):
        with pytest.raises(SchemaError, match="unknown players"):
            CoalitionManifest(
                players=(Player("A"),),
                baseline_label="b",
                original=DataSource(image_dir=tmp_path),
                coalitions=(
                    self._entry("b", [], tmp_path),
                    self._entry("bad", ["Z"], tmp_path),
                ),
            )

    def test_baseline_entry_required(self, tmp_path):
        with pytest.raises(SchemaError, match="baseline"):
            CoalitionManifest(
                players=(Player("A"),),
                baseline_label="b",
                original=DataSource(image_dir=tmp_path),
                coalitions=(self._entry("only_a", ["A"], tmp_path),),
            )


class TestLoadManifest:
    def test_happy_path(self, tmp_path):
        path = write_manifest(tmp_path / "study.json", study_doc())
        m = load_manifest(path)
        assert [p.id for p in m.players] == ["A", "B"]
        assert m.players[0].component_kind is ComponentKind.LORA
        assert m.baseline_label == "plain_pipeline"
        assert m.feature_source is FeatureSourceKind.BUILTIN_PIXEL
        assert len(m.coalitions) == 4

    def test_relative_paths_resolve_against_manifest_dir(self, tmp_path):
        nested = tmp_path / "sub"
        nested.mkdir()
        path = write_manifest(nested / "study.json", study_doc())
        m = load_manifest(path)
        assert m.original.image_dir == nested / "orig"
        assert m.coalitions[1].source.image_dir == nested / "c_a"

    def test_missing_file(self, tmp_path):
        with pytest.raises(SchemaError, match="not found"):
            load_manifest(tmp_path / "absent.json")

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(SchemaError, match="JSON"):
            load_manifest(path)

    def test_top_level_must_be_object(self, tmp_path):
        path = tmp_path / "arr.json"
        path.write_text("[1, 2]")
        with pytest.raises(SchemaError, match="object"):
            load_manifest(path)

    def test_players_field_required(self, tmp_path):
        doc = study_doc()
        del doc["players"]
        path = write_manifest(tmp_path / "s.json", doc)
        with pytest.raises(SchemaError, match="players"):
            load_manifest(path)

    def test_player_needs_id(self, tmp_path):
        doc = study_doc(players=[{"component_kind": "Lora"}])
        path = write_manifest(tmp_path / "s.json", doc)
        with pytest.raises(SchemaError, match="id"):
            load_manifest(path)

    def test_unknown_component_kind(self, tmp_path):
        doc = study_doc(players=[{"id": "A", "component_kind": "Diffuser"}])
        path = write_manifest(tmp_path / "s.json", doc)
        with pytest.raises(SchemaError, match="Diffuser"):
            load_manifest(path)

    def test_kind_optional(self, tmp_path):
        doc = study_doc(
            players=[{"id": "A"}, {"id": "B"}],
        )
        path = write_manifest(tmp_path / "s.json", doc)
        assert load_manifest(path).players[0].component_kind is None

    def test_coalition_needs_label(self, tmp_path):
        doc = study_doc()
        del doc["coalitions"][0]["label"]
        path = write_manifest(tmp_path / "s.json", doc)
        with pytest.raises(SchemaError, match="label"):
            load_manifest(path)

    def test_coalition_needs_members_list(self, tmp_path):
        doc = study_doc()
        doc["coalitions"][1]["members"] = "A"
        path = write_manifest(tmp_path / "s.json", doc)
        with pytest.raises(SchemaError, match="members"):
            load_manifest(path)

    def test_duplicate_member_in_row(self, tmp_path):
        doc = study_doc()
        doc["coalitions"][1]["members"] = ["A", "A"]
        path = write_manifest(tmp_path / "s.json", doc)
        with pytest.raises(SchemaError, match="duplicate"):
            load_manifest(path)

    def test_source_must_be_single(self, tmp_path):
        doc = study_doc()
        doc["coalitions"][1]["feature_file"] = "f.csf"
        path = write_manifest(tmp_path / "s.json", doc)
        with pytest.raises(SchemaError, match="exactly one"):
            load_manifest(path)

    def test_original_required(self, tmp_path):
        doc = study_doc()
        del doc["original"]
        path = write_manifest(tmp_path / "s.json", doc)
        with pytest.raises(SchemaError, match="original"):
            load_manifest(path)

    def test_bad_feature_source(self, tmp_path):
        doc = study_doc(feature_source="Resnet")
        path = write_manifest(tmp_path / "s.json", doc)
        with pytest.raises(SchemaError, match="Resnet"):
            load_manifest(path)


class TestRunConfig:
    def test_defaults(self):
        cfg = RunConfig()
        assert cfg.resolution == 256
        assert cfg.norm_mode is NormalizeMode.SHARE_OF_TOTAL
        assert cfg.permutations == 4096
        assert cfg.seed == 0

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"resolution": 4},
            {"fid_eps_coeff": -1.0},
            {"permutations": 0},
            {"seed": -1},
            {"seed": 2**64},
        ],
    )
    def test_validation(self, kwargs):
        with pytest.raises(ConfigError):
            RunConfig(**kwargs)

    def test_with_out_dir(self, tmp_path):
        cfg = RunConfig().with_out_dir(tmp_path)
        assert cfg.out_dir == tmp_path

    def test_out_dir_env_default(self, tmp_path, monkeypatch):
        monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path / "reports"))
        assert RunConfig().out_dir == tmp_path / "reports"
        monkeypatch.delenv(OUTPUT_DIR_ENV)
        assert str(RunConfig().out_dir) == "."

    def test_to_dict_is_json_ready(self):
        d = RunConfig().to_dict()
        json.dumps(d)
        assert set(d) == {
            "resolution",
            "ssim",
            "fid_eps_coeff",
            "norm_mode",
            "seed",
            "permutations",
            "out_dir",
        }
        assert d["norm_mode"] == "ShareOfTotal"


class TestEntryLoading:
    def test_images_from_feature_source_fails(self, tmp_path):
        src = DataSource(feature_file=tmp_path / "f.csf")
        with pytest.raises(DatasetError, match="with_a"):
            load_entry_images(src, "with_a")

    def test_missing_dir_names_label(self, tmp_path):
        src = DataSource(image_dir=tmp_path / "nowhere")
        with pytest.raises(DatasetError, match="with_b"):
            load_entry_images(src, "with_b")

    def test_builtin_rejects_feature_file(self, tmp_path):
        src = DataSource(feature_file=tmp_path / "f.csf")
        with pytest.raises(ConfigError, match="External"):
            load_entry_features(src, "x", FeatureSourceKind.BUILTIN_PIXEL)

    def test_external_rejects_image_dir(self, tmp_path):
        src = DataSource(image_dir=tmp_path)
        with pytest.raises(ConfigError, match="External"):
            load_entry_features(src, "x", FeatureSourceKind.EXTERNAL)

    def test_external_reads_feature_file(self, tmp_path, rng):
        fs = FeatureSet(matrix=rng.standard_normal((4, 3)))
        path = tmp_path / "f.csf"
        write_features_binary(fs, path)
        got = load_entry_features(
            DataSource(feature_file=path), "x", FeatureSourceKind.EXTERNAL
        )
        assert (got.n, got.d) == (4, 3)

    def test_schema_errors_name_the_label(self, tmp_path):
        path = tmp_path / "f.csf"
        path.write_bytes(b"CSF1")
        with pytest.raises(SchemaError, match="broken_entry"):
            load_entry_features(
                DataSource(feature_file=path), "broken_entry", FeatureSourceKind.EXTERNAL
            )


class TestValueTableFromManifest:
    def test_builtin_pixel_study(self, tmp_path, rng):
        populate_dirs(tmp_path, rng)
        manifest = load_manifest(write_manifest(tmp_path / "s.json", study_doc()))
        table = value_table_from_manifest(manifest, RunConfig())
        assert table.orientation is Orientation.LOWER_IS_BETTER
        assert table.baseline_label == "plain_pipeline"
        table.require_complete()

        from copyscope.fid import features_from_images
        from copyscope.image_core import load_image_set

        original_stats = fit_gaussian(features_from_images(load_image_set(tmp_path / "orig")))
        want = fid(
            original_stats,
            fit_gaussian(features_from_images(load_image_set(tmp_path / "c_a"))),
        )
        assert table.raw(Coalition.of(["A"])) == want

    def test_duplicate_member_sets_rejected(self, tmp_path, rng):
        doc = study_doc()
        doc["coalitions"].append(
            {"label": "with_a_again", "members": ["A"], "image_dir": "c_a"}
        )
        populate_dirs(tmp_path, rng)
        manifest = load_manifest(write_manifest(tmp_path / "s.json", doc))
        with pytest.raises(SchemaError, match="with_a_again"):
            value_table_from_manifest(manifest, RunConfig())

    def test_external_study(self, tmp_path, rng):
        doc = {
            "players": [{"id": "A"}],
            "original": {"feature_file": "orig.csf"},
            "feature_source": "External",
            "coalitions": [
                {"label": "base", "members": [], "feature_file": "base.csf"},
                {"label": "a", "members": ["A"], "feature_file": "a.csf"},
            ],
        }
        sets = {}
        for name in ("orig", "base", "a"):
            fs = FeatureSet(matrix=rng.standard_normal((6, 4)))
            write_features_binary(fs, tmp_path / f"{name}.csf")
            sets[name] = fs
        manifest = load_manifest(write_manifest(tmp_path / "s.json", doc))
        table = value_table_from_manifest(manifest, RunConfig())
        orig_stats = fit_gaussian(sets["orig"].matrix.astype(np.float32).astype(np.float64))
        want = fid(
            orig_stats,
            fit_gaussian(sets["a"].matrix.astype(np.float32).astype(np.float64)),
        )
        assert table.raw(Coalition.of(["A"])) == pytest.approx(want, abs=1e-12)

    def test_dimension_mismatch(self, tmp_path, rng):
        doc = {
            "players": [{"id": "A"}],
            "original": {"feature_file": "orig.csf"},
            "feature_source": "External",
            "coalitions": [
                {"label": "base", "members": [], "feature_file": "base.csf"},
                {"label": "a", "members": ["A"], "feature_file": "a.csf"},
            ],
        }
        write_features_binary(FeatureSet(matrix=rng.standard_normal((5, 4))), tmp_path / "orig.csf")
        write_features_binary(FeatureSet(matrix=rng.standard_normal((5, 4))), tmp_path / "base.csf")
        write_features_binary(FeatureSet(matrix=rng.standard_normal((5, 7))), tmp_path / "a.csf")
        manifest = load_manifest(write_manifest(tmp_path / "s.json", doc))
        with pytest.raises(ConfigError, match="dimension"):
            value_table_from_manifest(manifest, RunConfig())
