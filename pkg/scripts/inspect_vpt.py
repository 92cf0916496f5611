#!/usr/bin/env python3
"""Sweep the human avatar's heading and print how each hologram's cost and
region respond, as a quick sanity read on the perspective-taking stack."""

import argparse
import math

from holosim.vpt import assess_free_holograms
from holosim.world import ScenarioConfig, load_scenario


def parse_args():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--scenario", default="fig5_room")
    p.add_argument("--steps", type=int, default=8, help="headings per full turn")
    return p.parse_args()


if __name__ == "__main__":
    args = parse_args()
    scn = ScenarioConfig.from_file(args.scenario)
    w = load_scenario(scn)
    ids = sorted(h.id for h in w.holograms)
    print("heading_deg " + " ".join(f"| h{i}: cost region" for i in ids))
    for k in range(args.steps):
        w.human.heading = 2 * math.pi * k / args.steps
        rows = assess_free_holograms(w)
        cells = [f"| {rows[i].cost:5.2f} {rows[i].region.value[:5]:5s}" for i in ids]
        print(f"{math.degrees(w.human.heading):11.1f} " + " ".join(cells))
