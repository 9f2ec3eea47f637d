"""Command-line surface tying the toolkit together.

Subcommands:
  metrics    pixel-level similarity suite per coalition (CSV + JSON)
  fid        one distribution distance between two image sets, to stdout
  attribute  Shapley / leave-one-out contributions from a value table
             or a manifest (JSON + CSV)
  ablate     dropout analysis of a value table (JSON + CSV)
  report     attribute + ablate, plus rendered figures

Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric or
internal-consistency error. Failures also print one JSON object to stderr
so callers never have to parse prose.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .ablation import ablate
from .errors import (
    EXIT_USAGE,
    AxiomViolationError,
    ConfigError,
    CopyscopeError,
)
from .fid import fid, features_from_images, fit_gaussian
from .game import (
    NormalizeMode,
    Orientation,
    check_axioms,
    load_value_table,
    loo,
    normalize,
    shapley_exact,
    shapley_sampled,
)
from .image_core import load_image_set
from .interchange import read_features
from .manifest import (
    OUTPUT_DIR_ENV,
    RunConfig,
    load_entry_images,
    load_manifest,
    value_table_from_manifest,
)
from .metrics import DEFAULT_RESOLUTION, metric_report
from . import report as report_io

_NORM_MODES = {
    "share": NormalizeMode.SHARE_OF_TOTAL,
    "minmax": NormalizeMode.MIN_MAX,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="copyscope",
        description="Quantify each model's contribution to image similarity "
        "in a generation workflow.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser, table_input: bool = False):
        p.add_argument(
            "--out",
            default=None,
            help=f"output directory (default: ${OUTPUT_DIR_ENV} or current dir)",
        )
        p.add_argument(
            "--resolution",
            type=int,
            default=DEFAULT_RESOLUTION,
            help="common resolution images are resampled to for metrics",
        )
        if table_input:
            p.add_argument("--table", help="value table CSV (members,value)")
            p.add_argument("--manifest", help="study manifest JSON")
            p.add_argument(
                "--baseline-label",
                default="baseline",
                help="name of the empty-coalition pipeline (tables only)",
            )
            p.add_argument(
                "--orientation",
                choices=[o.value for o in Orientation],
                default=Orientation.LOWER_IS_BETTER.value,
                help="score direction of the value table (tables only)",
            )

    p_metrics = sub.add_parser("metrics", help="similarity suite per coalition")
    p_metrics.add_argument("--manifest", required=True, help="study manifest JSON")
    add_common(p_metrics)
    p_metrics.set_defaults(func=cmd_metrics)

    p_fid = sub.add_parser("fid", help="distance between two image sets")
    p_fid.add_argument("--real", required=True, help="original images dir or feature file")
    p_fid.add_argument("--gen", required=True, help="generated images dir or feature file")
    p_fid.add_argument(
        "--features",
        action="store_true",
        help="treat --real/--gen as interchange feature files instead of image dirs",
    )
    add_common(p_fid)
    p_fid.set_defaults(func=cmd_fid)

    p_attr = sub.add_parser("attribute", help="per-model contribution values")
    add_common(p_attr, table_input=True)
    p_attr.add_argument(
        "--method",
        choices=["shapley", "loo", "both", "sampled"],
        default="both",
        help="attribution method (sampled = Monte Carlo Shapley)",
    )
    p_attr.add_argument(
        "--norm", choices=sorted(_NORM_MODES), default="share",
        help="normalization recorded alongside raw values",
    )
    p_attr.add_argument("--seed", type=int, default=0, help="sampling seed (64-bit)")
    p_attr.add_argument(
        "--perms", type=int, default=4096, help="permutations for --method sampled"
    )
    p_attr.add_argument(
        "--workers", type=int, default=1,
        help="worker threads for sampling (never changes the numbers)",
    )
    p_attr.set_defaults(func=cmd_attribute)

    p_ablate = sub.add_parser("ablate", help="dropout deviation per model")
    add_common(p_ablate, table_input=True)
    p_ablate.set_defaults(func=cmd_ablate)

    p_report = sub.add_parser(
        "report", help="attribution + ablation with rendered figures"
    )
    add_common(p_report, table_input=True)
    p_report.add_argument(
        "--norm", choices=sorted(_NORM_MODES), default="share",
        help="normalization recorded alongside raw values",
    )
    p_report.set_defaults(func=cmd_report)

    return parser


def _emit_error(exc: BaseException, exit_code: int) -> None:
    doc = {"error": type(exc).__name__, "message": str(exc), "exit_code": exit_code}
    print(json.dumps(doc, sort_keys=True), file=sys.stderr)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (None, 0) else int(exc.code)
    try:
        return args.func(args)
    except CopyscopeError as exc:
        _emit_error(exc, exc.exit_code)
        return exc.exit_code
    except (ValueError, TypeError) as exc:
        _emit_error(exc, EXIT_USAGE)
        return EXIT_USAGE


def _config(args: argparse.Namespace) -> RunConfig:
    kwargs = {
        "resolution": getattr(args, "resolution", DEFAULT_RESOLUTION),
        "norm_mode": _NORM_MODES[getattr(args, "norm", "share")],
        "seed": getattr(args, "seed", 0),
        "permutations": getattr(args, "perms", 4096),
    }
    out = getattr(args, "out", None)
    config = RunConfig(**kwargs)
    if out is not None:
        config = config.with_out_dir(out)
    return config


def _out_dir(config: RunConfig) -> Path:
    config.out_dir.mkdir(parents=True, exist_ok=True)
    return config.out_dir


def _load_table(args: argparse.Namespace, config: RunConfig):
    got_table = getattr(args, "table", None) is not None
    got_manifest = getattr(args, "manifest", None) is not None
    if got_table == got_manifest:
        raise ValueError("exactly one of --table or --manifest is required")
    if got_table:
        return load_value_table(
            args.table,
            orientation=Orientation(args.orientation),
            baseline_label=args.baseline_label,
        )
    manifest = load_manifest(args.manifest)
    return value_table_from_manifest(manifest, config)


def cmd_metrics(args: argparse.Namespace) -> int:
    config = _config(args)
    manifest = load_manifest(args.manifest)
    original = load_entry_images(manifest.original, "original")
    original_stats = fit_gaussian(features_from_images(original))
    rows = []
    for entry in manifest.coalitions:
        generated = load_entry_images(entry.source, entry.label)
        distance = fid(
            original_stats,
            fit_gaussian(features_from_images(generated)),
            config.fid_eps_coeff,
        )
        rows.append(
            metric_report(
                generated,
                original,
                fid=distance,
                coalition_label=entry.label,
                params=config.ssim,
                resolution=config.resolution,
            )
        )
    out = _out_dir(config)
    report_io.write_json(report_io.metrics_payload(rows, config), out / "metrics.json")
    report_io.write_metrics_csv(rows, out / "metrics.csv")
    print(out / "metrics.json")
    print(out / "metrics.csv")
    return 0


def cmd_fid(args: argparse.Namespace) -> int:
    config = _config(args)
    if args.features:
        real = read_features(args.real)
        gen = read_features(args.gen)
    else:
        real = features_from_images(load_image_set(args.real))
        gen = features_from_images(load_image_set(args.gen))
    if real.d != gen.d:
        raise ConfigError(
            f"feature dimensions differ: {real.d} vs {gen.d}; "
            f"both sides must use the same feature source"
        )
    value = fid(fit_gaussian(real), fit_gaussian(gen), config.fid_eps_coeff)
    print(repr(value))
    return 0


def _attribution_results(args, table, config, methods):
    results = {}
    axioms = None
    if "shapley" in methods:
        exact = shapley_exact(table)
        axioms = check_axioms(table, exact)
        if not axioms.ok:
            raise AxiomViolationError(
                "exact Shapley result violates its axioms: "
                f"efficiency gap {axioms.efficiency_gap:.3e}, "
                f"null max {axioms.null_max_abs:.3e}, "
                f"symmetry gap {axioms.symmetry_max_gap:.3e}"
            )
        results["ShapleyExact"] = normalize(exact, config.norm_mode)
    if "loo" in methods:
        results["LOO"] = normalize(loo(table), config.norm_mode)
    if "sampled" in methods:
        sampled = shapley_sampled(
            table, config.permutations, config.seed, workers=getattr(args, "workers", 1)
        )
        results["ShapleySampled"] = normalize(sampled, config.norm_mode)
    return results, axioms


def cmd_attribute(args: argparse.Namespace) -> int:
    config = _config(args)
    table = _load_table(args, config)
    methods = {"both": ["shapley", "loo"]}.get(args.method, [args.method])
    results, axioms = _attribution_results(args, table, config, methods)
    out = _out_dir(config)
    payload = report_io.attribution_payload(results, table, config, axioms)
    report_io.write_json(payload, out / "attribution.json")
    report_io.write_attribution_csv(results, out / "attribution.csv")
    print(out / "attribution.json")
    print(out / "attribution.csv")
    return 0


def cmd_ablate(args: argparse.Namespace) -> int:
    config = _config(args)
    table = _load_table(args, config)
    result = ablate(table)
    out = _out_dir(config)
    report_io.write_json(
        report_io.ablation_payload(result, table, config), out / "ablation.json"
    )
    report_io.write_ablation_csv(result, out / "ablation.csv")
    print(out / "ablation.json")
    print(out / "ablation.csv")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    config = _config(args)
    table = _load_table(args, config)
    results, axioms = _attribution_results(args, table, config, ["shapley", "loo"])
    ablation = ablate(table)
    out = _out_dir(config)
    report_io.write_json(
        report_io.attribution_payload(results, table, config, axioms),
        out / "attribution.json",
    )
    report_io.write_attribution_csv(results, out / "attribution.csv")
    report_io.write_json(
        report_io.ablation_payload(ablation, table, config), out / "ablation.json"
    )
    report_io.write_ablation_csv(ablation, out / "ablation.csv")
    report_io.attribution_figure(results, out / "attribution_comparison.png")
    report_io.ablation_figure(ablation, out / "ablation.png")
    for name in (
        "attribution.json",
        "attribution.csv",
        "ablation.json",
        "ablation.csv",
        "attribution_comparison.png",
        "ablation.png",
    ):
        print(out / name)
    return 0


if __name__ == "__main__":
    sys.exit(main())
