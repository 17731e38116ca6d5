"""Multi-seed desk-scale experiment: CE baseline vs SCST variants.

Usage: python demos/desk_experiment.py [--seeds 1 2 3] [--noise 0.3]

Each seed takes roughly 20 seconds per table row on one core.
"""

import argparse

import numpy as np

from scst.trainer import DeskSetup, desk_experiment, format_table

parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
parser.add_argument("--seeds", type=int, nargs="+", default=[1, 2, 3])
parser.add_argument("--noise", type=float, default=0.3)
args = parser.parse_args()

sweep = [(0.001, "I"), (0.0, "I"), (0.001, "II")]
wers = {}
for seed in args.seeds:
    rows = desk_experiment(DeskSetup(), args.noise, seed, sweep)
    print(f"seed {seed}\n{format_table(rows)}\n")
    for row in rows:
        wers.setdefault((row.model, row.lam, row.reward_kind), []).append(row.wer)

print(f"median test WER over {len(args.seeds)} seeds, noise_sigma={args.noise}")
for (model, lam, kind), values in wers.items():
    label = model if model == "Baseline" else f"{model} lambda={lam:g} Reward {kind}"
    print(f"  {label:32s} {100 * np.median(values):6.2f}%")
