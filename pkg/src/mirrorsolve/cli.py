"""Command-line interface.

Subcommands::

    mirrorsolve run    --config cfg [--out DIR] [--delta D] [--seed S] [--fast]
    mirrorsolve sweep  --config cfg [--out DIR] [--fast]
    mirrorsolve verify [--fast]
    mirrorsolve smd    --config cfg [--out DIR] [--seed S] [--fast]

Exit code 0 on success.  On failure a single machine-readable JSON line is
printed to stderr and the exit code is nonzero.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import checks, experiments, smd
from .config import ExperimentConfig, parse_config
from .grids import add_noise
from .landweber import (
    APrioriStop,
    DiscrepancyStop,
    MaxIterStop,
    run,
    write_iterates_csv,
)

__all__ = ["main"]


def _build_setup(cfg: ExperimentConfig):
    if cfg.problem == "entropy_integral":
        return experiments.setup_entropy_experiment(cfg.n)
    if cfg.problem == "pde_coefficient":
        return experiments.setup_pde_experiment(cfg.n)
    raise ValueError(f"problem {cfg.problem!r} has no deterministic setup")


def _cmd_run(args) -> int:
    cfg = parse_config(args.config).resolved(fast=args.fast)
    delta = args.delta if args.delta is not None else cfg.deltas[0]
    seed = args.seed if args.seed is not None else cfg.seeds[0]
    setup = _build_setup(cfg)
    rule = experiments.make_step_rule(
        cfg.rule, tau=cfg.tau, eta=cfg.eta, delta=delta, gamma=cfg.gamma,
        gamma_bar=cfg.gamma_bar, gamma0=cfg.gamma0, cap_mode=cfg.cap_mode,
        apriori=cfg.stopping == "apriori")
    if cfg.stopping == "discrepancy":
        stop = DiscrepancyStop(tau=cfg.tau, delta=delta)
    elif cfg.stopping == "apriori":
        stop = APrioriStop(delta=delta, c=cfg.apriori_c)
    else:
        stop = MaxIterStop(k_max=cfg.max_iter if cfg.max_iter is not None else 1000)
    y_delta = add_noise(setup.y, delta, seed)
    res = run(setup.forward, setup.reg, y_delta, rule, stop,
              x_truth=setup.x_true, lambda_tracking=setup.forward.linear)
    err = setup.reg.error_norm(res.x - setup.x_true)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        tag = f"{delta:g}".replace(".", "p")
        write_iterates_csv(res.records, out / f"iterates_{tag}_{seed}.csv")
    print(f"problem={cfg.problem} rule={cfg.rule} delta={delta:g} seed={seed} "
          f"stop={res.stop_reason} iter={res.k_stop} err={err:.6e} "
          f"ratio={err / math.sqrt(delta):.6f}")
    return 0


def _cmd_sweep(args) -> int:
    cfg = parse_config(args.config).resolved(fast=args.fast)
    setup = _build_setup(cfg)
    out_dir = Path(args.out) if args.out else None
    outcome = experiments.run_rate_sweep(
        setup, cfg.rule, cfg.deltas, cfg.seeds, tau=cfg.tau, eta=cfg.eta,
        gamma=cfg.gamma, gamma_bar=cfg.gamma_bar, gamma0=cfg.gamma0,
        stopping=cfg.stopping, apriori_c=cfg.apriori_c, max_iter=cfg.max_iter,
        out_dir=out_dir, keep_records=False)
    failed = [c for c in outcome.cells if c.failed]
    for row in outcome.table.rows:
        print(f"rule={row.rule} delta={row.delta:g} iter={row.iters:g} "
              f"err={row.err:.6e} ratio={row.ratio:.6f}")
    if out_dir is not None:
        info = experiments.emit_plot_data(outcome.table, out_dir)
        slope = info["slope"]
        print(f"rate files in {out_dir} (lsq slope: "
              f"{'n/a' if slope is None else format(slope, '.4f')})")
    for c in failed:
        print(f"flagged cell delta={c.delta:g} seed={c.seed}: {c.error_message}",
              file=sys.stderr)
    return 0 if not failed else 3


def _cmd_verify(args) -> int:
    results = checks.run_all(fast=args.fast)
    bad = 0
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}")
        bad += not r.passed
    print(f"{len(results) - bad}/{len(results)} checks passed")
    return 0 if bad == 0 else 2


def _cmd_smd(args) -> int:
    cfg = parse_config(args.config)
    if cfg.smd_regularizer == "entropy":
        from .regularizers import EntropySimplex
        reg = EntropySimplex()
    elif cfg.smd_regularizer == "elastic":
        from .regularizers import ElasticNet
        reg = ElasticNet(beta=cfg.smd_beta)
    else:
        raise ValueError(f"unknown smd regularizer {cfg.smd_regularizer!r}")
    inst = smd.build_sourced_instance(
        cfg.smd_blocks, cfg.smd_n, reg, cfg.smd_instance_seed,
        smoothing=cfg.smd_smoothing, lam_scale=cfg.smd_lam_scale)
    if cfg.smd_alpha is not None:
        sched = smd.PolynomialSchedule(gamma0=cfg.smd_gamma, alpha=cfg.smd_alpha)
    else:
        sched = smd.ConstantSchedule(gamma=cfg.smd_gamma)
    seeds = [args.seed] if args.seed is not None else list(cfg.seeds)
    out_dir = Path(args.out) if args.out else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    finals = []
    for seed in seeds:
        sr = smd.smd_run(inst.problem, reg, sched, cfg.smd_k_max, seed,
                         x_truth=inst.x_true, xi0=inst.xi0)
        last = sr.records[-1]
        finals.append(last.s_delta)
        print(f"seed={seed} k={last.k} delta_k={last.delta_k:.6e} "
              f"s_k*delta_k={last.s_delta:.6e}")
        if out_dir is not None:
            smd.write_rate_csv(sr, out_dir / f"smd_rate_{seed}.csv")
    print(f"median s_k*delta_k at k={cfg.smd_k_max}: {np.median(finals):.6e}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="mirrorsolve",
        description="Mirror-descent Landweber solvers and rate benchmarks "
                    "for ill-posed inverse problems")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a single (delta, seed) cell")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", default=None)
    p_run.add_argument("--delta", type=float, default=None)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--fast", action="store_true", help="coarse grids")
    p_run.set_defaults(fn=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="run the full (delta, seed) table")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--out", default=None)
    p_sweep.add_argument("--fast", action="store_true", help="coarse grids")
    p_sweep.set_defaults(fn=_cmd_sweep)

    p_verify = sub.add_parser("verify", help="run the oracle/property suites")
    p_verify.add_argument("--fast", action="store_true")
    p_verify.set_defaults(fn=_cmd_verify)

    p_smd = sub.add_parser("smd", help="stochastic mirror descent rate study")
    p_smd.add_argument("--config", required=True)
    p_smd.add_argument("--out", default=None)
    p_smd.add_argument("--seed", type=int, default=None)
    p_smd.add_argument("--fast", action="store_true")
    p_smd.set_defaults(fn=_cmd_smd)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except Exception as exc:  # noqa: BLE001 -- uniform machine-readable failure
        print(json.dumps({"status": "error", "type": type(exc).__name__,
                          "message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
