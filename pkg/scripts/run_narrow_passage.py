"""Narrow-passage benchmark: all three variants over the shipped seeds."""

import argparse
import sys

from posh.cli import main
from posh.config import data_path


def parse_args(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out", default="out")
    p.add_argument("--runs", type=int, default=None)
    p.add_argument("--frames", action="store_true", help="also render SVG frames of seed 0")
    return p.parse_args(argv)


if __name__ == "__main__":
    args = parse_args()
    cfg = str(data_path("narrow_passage_bench.json"))
    extra = ["--runs", str(args.runs)] if args.runs else []
    code = main(["bench", "--config", cfg, "--out", args.out, *extra])
    if code == 0 and args.frames:
        code = main(["plan", "--config", cfg, "--out", args.out, "--frames"])
    sys.exit(code)
