#!/usr/bin/env python3
"""Full integral-equation rate study: all three step rules over a noise sweep.

Writes one directory per rule under --out with table.csv, rate.csv (plus a
plot script), and per-cell iterate logs.  Use --fast for the coarse grid.
"""

import argparse
import time
from pathlib import Path

from mirrorsolve.experiments import (
    emit_plot_data,
    run_rate_sweep,
    setup_entropy_experiment,
)

def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/entropy")
    ap.add_argument("--n", type=int, default=5000)
    ap.add_argument("--fast", action="store_true", help="n = 1000")
    ap.add_argument("--deltas", type=float, nargs="+",
                    default=[5e-2, 5e-3, 5e-4, 5e-5])
    ap.add_argument("--seeds", type=int, nargs="+", default=[1, 2, 3, 4, 5])
    args = ap.parse_args()

    n = 1000 if args.fast else args.n
    setup = setup_entropy_experiment(n)
    for rule in ("rule1", "rule2", "rule3"):
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
