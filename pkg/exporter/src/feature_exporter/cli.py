"""Command line entry point: image directory to feature interchange file."""

from __future__ import annotations

import argparse
import sys

from .backbone import DEFAULT_BACKBONE, SPECS
from .export import ExportError, ExportJob, export_features, sidecar_path

EXIT_OK = 0
EXIT_USAGE = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="csf-export",
        description="Embed an image directory into a CSF1 feature "
        "interchange file plus a .meta.json sidecar.",
    )
    parser.add_argument("--in", dest="input_dir", required=True, help="image directory")
    parser.add_argument(
        "--out", dest="output_file", required=True, help="interchange file to write"
    )
    parser.add_argument(
        "--model",
        default=DEFAULT_BACKBONE,
        choices=sorted(SPECS),
        help="feature backbone",
    )
    parser.add_argument(
        "--batch",
        type=int,
        default=16,
        help="decoded images held in memory at once (never changes the output)",
    )
    parser.add_argument(
        "--size",
        type=int,
        default=64,
        help="square resize applied before embedding",
    )
    parser.add_argument(
        "--skip-undecodable",
        action="store_true",
        help="skip undecodable images with a warning instead of failing",
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (None, 0) else int(exc.code)
    try:
        job = ExportJob(
            input_dir=args.input_dir,
            output_file=args.output_file,
            backbone_name=args.model,
            batch_size=args.batch,
            image_size=args.size,
            skip_undecodable=args.skip_undecodable,
        )
        out = export_features(job)
    except ExportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(out)
    print(sidecar_path(out))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
