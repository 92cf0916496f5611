#!/usr/bin/env python3
"""Reproduce the two-condition resource-collection experiment.

Runs the bundled room scenario over N paired seeds with the robot helper
on vs off, prints the paired table, and writes report files.
"""

import argparse
import pathlib

from holosim.cli import main as cli


def parse_args():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--scenario", default="fig5_room")
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--out", default="comparison")
    return p.parse_args()


if __name__ == "__main__":
    args = parse_args()
    pathlib.Path(args.out).mkdir(parents=True, exist_ok=True)
    cli(["compare", args.scenario, "--seeds", str(args.seeds), "--out", args.out],
        standalone_mode=True)
