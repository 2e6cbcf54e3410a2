"""Exploratory: where does the admissible smoothness-integrability range end?

The theory guarantees finite expected energy E||f^H||^p_{W^{s,p}} for
p < alpha and s < lambda, and it is expected (but not proven) that the
product p*s cannot be pushed beyond alpha*lambda.  This script walks a
grid of (s, p) pairs for a Cauchy-weighted Lipschitz network (alpha = 1,
lambda = 1, so the conjectured boundary is p*s = 1) and tabulates the
estimated energies across widths.  Blow-up past the boundary shows up as
means that grow with width and with the Monte Carlo budget.

No pass/fail status is attached: there is no quantitative claim to
check, only a picture to look at.  Run time is a couple of minutes.

    python3 experiments/smoothness_boundary.py [--out boundary.csv]
"""

import argparse
import math

import numpy as np

from stablefield import (
    Domain,
    MonteCarloConfig,
    NetworkConfig,
    RngStream,
    SobolevParams,
    clipped_linear,
    sample_network,
    with_width,
)
from stablefield.diagnostics import _energy_profile_shallow


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default=None, help="optional CSV path")
    parser.add_argument("--reps", type=int, default=60)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    domain = Domain.interval(-1.0, 1.0)
    config = NetworkConfig(1.0, 1, (16,), (1.0, 0.0, 5.0, 2.0), clipped_linear())
    widths = (64, 1024, 16384)
    # p*s walks across the conjectured boundary alpha*lambda = 1
    pairs = [(0.60, 0.85), (0.70, 0.90), (0.80, 0.95), (0.90, 0.98),
             (0.95, 0.99), (0.99, 0.995)]
    root = RngStream(args.seed)

    rows = []
    print(f"{'s':>6} {'p':>6} {'s*p':>6} " + " ".join(f"H={w:<6}" for w in widths))
    for s, p in pairs:
        params = SobolevParams(s, p, 1)
        mc = MonteCarloConfig(2048, 512, lambda_hint=1.0)
        table = np.empty((args.reps, len(widths)))
        for rep in range(args.reps):
            wide = sample_network(with_width(config, widths[-1]),
                                  root.substream("rep", s, rep))
            table[rep] = _energy_profile_shallow(
                wide, widths, domain, params, mc, root.substream("mc", s, rep)
            )
        medians = np.median(table, axis=0)
        print(f"{s:6.2f} {p:6.3f} {s * p:6.3f} "
              + " ".join(f"{m:8.2f}" for m in medians))
        for w, med, mean in zip(widths, medians, table.mean(axis=0)):
            rows.append((s, p, s * p, w, med, mean))

    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write("s,p,sp,width,median_energy,mean_energy\n")
            for row in rows:
                fh.write(",".join(repr(float(x)) for x in row) + "\n")
        print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
