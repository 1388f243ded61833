#!/usr/bin/env python3
"""Full variant x scenario ablation followed by the grouped bar chart."""
import argparse
import os
import sys

from sbn.cli import main


def run(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=os.path.join(os.path.dirname(__file__), "..", "configs", "desk.cfg"))
    ap.add_argument("--runs", type=int)
    ap.add_argument("--out", default="results/fig6")
    args = ap.parse_args(argv)
    cmd = ["ablate", "--config", args.config, "--out", args.out]
    if args.runs is not None:
        cmd += ["--runs", str(args.runs)]
    rc = main(cmd)
    if rc:
        return rc
    return main(["plot", "--energy", os.path.join(args.out, "fig6_energy.csv"),
                 "--latency", os.path.join(args.out, "fig6_latency.csv"),
                 "--out", os.path.join(args.out, "fig6.svg")])


if __name__ == "__main__":
    sys.exit(run())
