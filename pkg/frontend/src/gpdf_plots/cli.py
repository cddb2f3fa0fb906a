"""gpdf-plots: render static figures from a tree of scenario outputs."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional

from .figures import KINDS_BY_FILE, render_figure, specs_for_csv, write_index
from .schemas import SchemaError


def discover(in_dir: Path) -> list[Path]:
    """Known CSV files anywhere under the input directory, sorted."""
    found = []
    for name in KINDS_BY_FILE:
        found.extend(Path(in_dir).rglob(name))
    return sorted(found)


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="gpdf-plots")
    parser.add_argument("--in", dest="in_dir", type=Path, required=True,
                        help="scenario output directory (searched recursively)")
    parser.add_argument("--out", dest="out_dir", type=Path, required=True,
                        help="directory for figures and the index page")
    args = parser.parse_args(argv)

    if not args.in_dir.is_dir():
        print(f"input directory not found: {args.in_dir}", file=sys.stderr)
        return 1
    csvs = discover(args.in_dir)
    if not csvs:
        print(f"no known scenario CSVs under {args.in_dir}", file=sys.stderr)
        return 1

    args.out_dir.mkdir(parents=True, exist_ok=True)
    results = []
    for csv_path in csvs:
        for spec in specs_for_csv(csv_path, args.out_dir):
            try:
                res = render_figure(spec)
            except SchemaError as exc:
                print(f"schema error: {exc}", file=sys.stderr)
                return 1
            results.append(res)
            note = f"  (warning: {res.warning})" if res.warning else ""
            print(f"wrote {spec.out_path.name}{note}")

    index = write_index(args.out_dir, results)
    print(f"index: {index}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
