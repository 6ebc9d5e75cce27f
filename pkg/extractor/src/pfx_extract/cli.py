"""Command line front end.

Exit codes: 0 success, 1 usage, 2 data or validation error.
"""
from __future__ import annotations

import argparse
import sys

from .encoders import DEFAULT_ENCODER
from .errors import ExtractError
from .extract import extract
from .featfile import validate_file
from .manifest import load_manifest


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pfx-extract", description="Encode images into a PFXFEAT1 feature file")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("extract", help="encode every manifest image")
    p.add_argument(
        "--manifest", required=True, help='TSV lines "path<TAB>id<TAB>caption1|caption2|..."'
    )
    p.add_argument("--out", required=True, help="output feature file path")
    p.add_argument(
        "--encoder", default=DEFAULT_ENCODER,
        help=f"encoder name (default: {DEFAULT_ENCODER}; 'pixel' runs fully offline)",
    )

    v = sub.add_parser("validate", help="check an existing feature file")
    v.add_argument("path", help="feature file to check")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code is None:
            return 0
        return exc.code if isinstance(exc.code, int) else 1
    if args.command is None:
        parser.print_usage(sys.stderr)
        sys.stderr.write("error: a subcommand is required\n")
        return 1
    try:
        if args.command == "extract":
            manifest = load_manifest(args.manifest, args.encoder, args.out)
            report = extract(manifest)
            tail = f", skipped {len(report.skipped)} (see sidecar)" if report.skipped else ""
            print(f"wrote {report.written} records (width {report.feat_dim}) to {report.out_path}{tail}")
        else:
            print(validate_file(args.path).summary())
    except (ExtractError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
