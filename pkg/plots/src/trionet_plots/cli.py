"""Batch entry point: render one figure kind from a summary CSV."""

from __future__ import annotations

import argparse
import sys

from .figures import KINDS, FigureRequest, render


def main(argv: list[str] | None = None) -> None:
    parser = argparse.ArgumentParser(
        prog="trionet-plots",
        description="Render figures (with JSON value sidecars) from sweep summary CSVs",
    )
    parser.add_argument("--csv", required=True, help="input summary CSV")
    parser.add_argument("--kind", required=True, choices=KINDS)
    parser.add_argument("--out", required=True, help="output image path (.png or .svg)")
    parser.add_argument("--sidecar", required=True, help="output JSON sidecar path")
    args = parser.parse_args(argv)
    try:
        render(
            FigureRequest(
                input_csv=args.csv,
                kind=args.kind,
                output_image=args.out,
                sidecar_path=args.sidecar,
            )
        )
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        sys.exit(1)
    print(f"wrote {args.out} and {args.sidecar}")


if __name__ == "__main__":
    main()
