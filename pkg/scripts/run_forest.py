"""Dynamic-forest benchmark over the 13 shipped layouts, with timing rows."""

import argparse
import sys

from posh.cli import main
from posh.config import data_path

if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out", default="out")
    p.add_argument("--runs", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)
    args = p.parse_args()
    extra = ["--runs", str(args.runs)] if args.runs else []
    sys.exit(main([
        "bench", "--config", str(data_path("forest_bench.json")),
        "--out", args.out, "--workers", str(args.workers), *extra,
    ]))
