"""POSH success in the forest as a function of the number of initial chains."""

import argparse
import sys

from posh.cli import main
from posh.config import data_path

if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out", default="out")
    p.add_argument("--chains", default="2,4,6")
    p.add_argument("--workers", type=int, default=1)
    args = p.parse_args()
    sys.exit(main([
        "sweep-chains", "--config", str(data_path("forest_bench.json")),
        "--out", args.out, "--chains", args.chains, "--workers", str(args.workers),
    ]))
