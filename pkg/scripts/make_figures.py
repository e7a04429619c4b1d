#!/usr/bin/env python3
"""Run every shipped configuration and render the full figure set.

Produces the out/ tree the shipped plot recipes expect, then renders
fig2 ... fig12 as SVG under figures/.  Expect a total runtime on the order
of an hour at full scale.
"""

import json
import subprocess
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
CONFIGS = ROOT / "configs"

RUNS = [
    "fig2_run_b002.json",
    "fig2_run_b005.json",
    "fig2_run_b02.json",
]
SWEEPS = [
    "fig4_tp_vs_mu1.json",
    "fig4_tp_vs_T.json",
    "fig5_surface.json",
    "fig6_tp_vs_b.json",
    "fig7_map.json",
    "fig8_curves.json",
    "fig9_groups_b05.json",
    "fig9_groups_b1.json",
    "fig10_group2.json",
    "fig11_group3.json",
]
FIGURES = [f"fig{i}" for i in range(2, 13)]


def call(*args):
    print("+", " ".join(args), flush=True)
    subprocess.run(args, check=True, cwd=ROOT)


def main():
    workers = sys.argv[1] if len(sys.argv) > 1 else "2"
    for name in RUNS:
        call(sys.executable, "-m", "dotflux.cli", "run", str(CONFIGS / name))
    for name in SWEEPS:
        call(
            sys.executable, "-m", "dotflux.cli", "sweep", str(CONFIGS / name),
            "--workers", workers,
        )
    for fig in FIGURES:
        call(sys.executable, "-m", "plotkit.cli", fig, "--root", str(ROOT))
    print("figures under", ROOT / "figures")


if __name__ == "__main__":
    main()
