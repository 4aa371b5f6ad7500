#!/usr/bin/env python3
"""Elliptic coefficient-identification rate study (rules 2 and 3).

The constant-step rule is not offered here: it needs a trustworthy bound on
the derivative norm, which this operator only has as a power-iteration
estimate.
"""

import argparse
import time
from pathlib import Path

from mirrorsolve.experiments import (
    emit_plot_data,
    run_rate_sweep,
    setup_pde_experiment,
)

def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/pde")
    ap.add_argument("--n", type=int, default=64, choices=[16, 32, 64, 128])
    ap.add_argument("--fast", action="store_true", help="n = 32")
    ap.add_argument("--deltas", type=float, nargs="+",
                    default=[1e-2, 1e-3, 1e-4])
    ap.add_argument("--seeds", type=int, nargs="+", default=[1, 2, 3, 4, 5])
    args = ap.parse_args()

    setup = setup_pde_experiment(32 if args.fast else args.n)
    for rule in ("rule2", "rule3"):
        t0 = time.time()
        out_dir = Path(args.out) / rule
        outcome = run_rate_sweep(setup, rule, args.deltas, args.seeds,
                                 out_dir=out_dir, keep_records=False)
        emit_plot_data(outcome.table, out_dir)
        print(f"== {rule} ({time.time() - t0:.1f}s) ==")
        for row in outcome.table.rows:
            print(f"  delta={row.delta:<8g} iter={row.iters:<7g} "
                  f"err={row.err:.4e} ratio={row.ratio:.4f}")

if __name__ == "__main__":
    main()
