"""Benchmark experiments: problem setups, rate sweeps, and table emission.

Two desk-scale studies are provided:

* ``entropy_integral`` -- first-kind integral equation on [0,1] with kernel
  1 + t + s, solved under the entropy regularizer.  The sought density
  x(t) = exp(1.5 a - 1 + a t) with a = 0.4949075935 integrates to one and
  satisfies the dual source condition 1 + log x = A* (a * 1) exactly.

* ``pde_coefficient`` -- recovery of the nonnegative potential c in
  -Lap(u) + c u = f on the unit square from noisy interior measurements of
  u, under the box-constrained quadratic regularizer.  The true coefficient
  (max(1 - 9(x^2+y^2), 0))^2 and source term f = -4 + (1+x^2+y^2) c make
  u(c) = 1 + x^2 + y^2; exact data is the *discrete* solve at the true
  coefficient so measurement noise, not discretization, drives the sweep.

A sweep runs one step-size rule over a grid of noise levels and seeds,
records the stopping index and reconstruction error per cell, aggregates
across seeds by the median, and emits deterministic CSV artifacts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grids import Grid, GridFunction, add_noise
from .landweber import (
    AdaptiveStep,
    APrioriStop,
    ConstantStep,
    DiscrepancyStop,
    MaxIterStop,
    MinimalErrorStep,
    RunResult,
    run,
    write_iterates_csv,
)
from .operators import EllipticCoefficient, EllipticSolver, LinearIntegral
from .regularizers import EntropySimplex, QuadraticBox

__all__ = [
    "ENTROPY_A",
    "EntropySetup",
    "PdeSetup",
    "setup_entropy_experiment",
    "setup_pde_experiment",
    "make_step_rule",
    "RateRow",
    "RateTable",
    "CellResult",
    "SweepOutcome",
    "run_rate_sweep",
    "fit_loglog_slope",
    "emit_plot_data",
]

#: root of exp(1.5 a - 1) (exp(a) - 1) / a = 1, which makes the benchmark
#: density integrate to one over [0, 1]
ENTROPY_A = 0.4949075935

#: default cap for the variable step-size rules
GAMMA_BAR_DEFAULT = 600.0

#: base constant for the uncapped factors of rules 1-3; must stay below
#: 4 * sigma = 2 for the 1/2-strongly-convex regularizers used here
GAMMA0_DEFAULT = 1.98


@dataclass(frozen=True)
class EntropySetup:
    forward: LinearIntegral
    reg: EntropySimplex
    x_true: GridFunction
    y: GridFunction
    lam_true: GridFunction
    eta: float
    tau_default: float


@dataclass(frozen=True)
class PdeSetup:
    forward: EllipticCoefficient
    reg: QuadraticBox
    x_true: GridFunction
    y: GridFunction
    eta: float
    tau_default: float


def setup_entropy_experiment(n: int, *, dense: bool = False) -> EntropySetup:
    """Integral-equation benchmark on n subintervals (n >= 100).

    The kernel 1 + t + s factors as 1*(1+s) + t*1, so the operator is applied
    through its two moments by default; ``dense=True`` materializes the full
    kernel matrix instead (identical up to rounding, ~200 MB at n = 5000).
    The discretized density is renormalized to exact unit quadrature mass so
    it lies inside the entropy domain on every grid; the adjustment is below
    1e-9 relative at n = 5000.
    """
    if n < 100:
        raise ValueError("entropy experiment needs n >= 100")
    grid = Grid.interval(n)
    t = grid.coords[0]
    raw = np.exp(1.5 * ENTROPY_A - 1.0 + ENTROPY_A * t)
    raw /= np.sum(grid.weights * raw)
    x_true = GridFunction(grid, raw)

    L = math.sqrt(19.0 / 3.0)
    if dense:
        forward = LinearIntegral(grid, kernel=lambda tt, ss: 1.0 + tt + ss,
                                 analytic_norm_bound=L)
    else:
        forward = LinearIntegral(
            grid,
            factors=[(lambda tt: np.ones_like(tt), lambda ss: 1.0 + ss),
                     (lambda tt: tt, lambda ss: np.ones_like(ss))],
            analytic_norm_bound=L)
    reg = EntropySimplex()
    y = forward.apply(x_true)
    lam_true = GridFunction(grid, np.full(grid.node_count, ENTROPY_A))
    return EntropySetup(forward, reg, x_true, y, lam_true, eta=0.0, tau_default=1.01)


def setup_pde_experiment(n: int, *, solver_tol: float = 1e-10) -> PdeSetup:
    """Coefficient-identification benchmark on an n x n square grid."""
    if n not in (16, 32, 64, 128):
        raise ValueError("pde experiment supports n in {16, 32, 64, 128}")
    grid = Grid.square(n)
    x, yy = grid.coords
    c_true = GridFunction(grid, np.maximum(1.0 - 9.0 * (x ** 2 + yy ** 2), 0.0) ** 2)
    u_true = GridFunction(grid, 1.0 + x ** 2 + yy ** 2)
    f = GridFunction(grid, -4.0 + u_true.values * c_true.values)
    forward = EllipticCoefficient(f, u_true, grid,
                                  solver=EllipticSolver(grid, tol=solver_tol))
    reg = QuadraticBox(lower=0.0)
    y = forward.apply(c_true)
    return PdeSetup(forward, reg, c_true, y, eta=0.04, tau_default=1.1)


def make_step_rule(name: str, *, tau: float, eta: float, delta: float,
                   gamma: float = None, gamma_bar: float = GAMMA_BAR_DEFAULT,
                   gamma0: float = GAMMA0_DEFAULT, cap_mode: str = "min",
                   apriori: bool = False):
    """Build one of the three benchmark step-size rules.

    rule1: constant gamma / L^2.  Under discrepancy stopping gamma defaults
    to gamma0 * (1 - eta - (1+eta)/tau); under a-priori stopping there is no
    tau coupling and the default is the larger gamma0, which still satisfies
    the constant-step admissibility bound 4 * sigma * (1 - eta).
    rule2: capped minimal-error step with the same gamma.
    rule3: capped adaptive step with gamma0 and the noise level delta.
    """
    if name == "rule3":
        return AdaptiveStep(gamma0=gamma0, gamma_bar=gamma_bar, tau=tau,
                            eta=eta, delta=delta, cap_mode=cap_mode)
    if gamma is None:
        if apriori:
            gamma = gamma0 * (1.0 - eta)
        else:
            gamma = gamma0 * (1.0 - eta - (1.0 + eta) / tau)
    if gamma <= 0:
        raise ValueError("tau too small: derived gamma is not positive")
    if name == "rule1":
        return ConstantStep(gamma=gamma)
    if name == "rule2":
        return MinimalErrorStep(gamma=gamma, gamma_bar=gamma_bar, cap_mode=cap_mode)
    raise ValueError(f"unknown rule {name!r} (expected rule1|rule2|rule3)")


# ---------------------------------------------------------------------------
# rate tables

@dataclass(frozen=True)
class RateRow:
    delta: float
    rule: str
    iters: float
    err: float

    @property
    def ratio(self) -> float:
        # always derived, never stored: err / sqrt(delta)
        return self.err / math.sqrt(self.delta)


@dataclass
class RateTable:
    rows: list

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("delta,rule,iter,err,ratio\n")
            for row in self.rows:
                fh.write(f"{row.delta:.17g},{row.rule},{row.iters:.17g},"
                         f"{row.err:.17g},{row.ratio:.17g}\n")


@dataclass
class CellResult:
    delta: float
    seed: int
    k_stop: int = None
    err: float = None
    result: RunResult = None
    error_message: str = None

    @property
    def failed(self) -> bool:
        return self.error_message is not None


@dataclass
class SweepOutcome:
    rule: str
    table: RateTable
    cells: list


def _delta_tag(delta: float) -> str:
    return f"{delta:g}".replace(".", "p")


def run_rate_sweep(setup, rule_name: str, deltas, seeds, *, tau: float = None,
                   eta: float = None, gamma: float = None,
                   gamma_bar: float = GAMMA_BAR_DEFAULT,
                   gamma0: float = GAMMA0_DEFAULT, stopping: str = "discrepancy",
                   apriori_c: float = 1.0, max_iter: int = None,
                   out_dir=None, keep_records: bool = True,
                   safety_cap: int = 10 ** 6) -> SweepOutcome:
    """Run one rule over a (delta, seed) grid and aggregate medians.

    Every (rule, stop) pair is constructed and validated before the first
    cell runs.  Cells that raise are flagged and skipped in the aggregation;
    the sweep continues.  With ``out_dir`` set, each cell writes
    ``iterates_<delta>_<seed>.csv`` and the median table lands in the caller's
    hands for byte-stable emission.
    """
    if tau is None:
        tau = setup.tau_default
    if eta is None:
        eta = setup.eta
    if rule_name == "rule1" and not isinstance(setup.forward, LinearIntegral):
        raise ValueError("rule1 needs a known norm bound; use rule2 or rule3 here")

    pairs = []
    for delta in deltas:
        if stopping == "discrepancy":
            stop = DiscrepancyStop(tau=tau, delta=delta)
        elif stopping == "apriori":
            stop = APrioriStop(delta=delta, c=apriori_c)
        elif stopping == "maxiter":
            stop = MaxIterStop(k_max=max_iter if max_iter is not None else 1000)
        else:
            raise ValueError(f"unknown stopping {stopping!r}")
        rule = make_step_rule(rule_name, tau=tau, eta=eta, delta=delta,
                              gamma=gamma, gamma_bar=gamma_bar, gamma0=gamma0,
                              apriori=stopping == "apriori")
        pairs.append((delta, rule, stop))

    lam_track = setup.forward.linear
    cells = []
    rows = []
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
    for delta, rule, stop in pairs:
        per_seed = []
        for seed in seeds:
            cell = CellResult(delta=delta, seed=seed)
            try:
                y_delta = add_noise(setup.y, delta, seed)
                res = run(setup.forward, setup.reg, y_delta, rule, stop,
                          x_truth=setup.x_true, lambda_tracking=lam_track,
                          safety_cap=safety_cap)
                cell.k_stop = res.k_stop
                cell.err = setup.reg.error_norm(res.x - setup.x_true)
                if keep_records:
                    cell.result = res
                if out_dir is not None:
                    write_iterates_csv(
                        res.records,
                        out_dir / f"iterates_{_delta_tag(delta)}_{seed}.csv")
                per_seed.append(cell)
            except Exception as exc:  # noqa: BLE001 -- flag the cell, keep sweeping
                cell.error_message = f"{type(exc).__name__}: {exc}"
                per_seed.append(cell)
            cells.append(cell)
        good = [c for c in per_seed if not c.failed]
        if good:
            rows.append(RateRow(
                delta=delta, rule=rule_name,
                iters=float(np.median([c.k_stop for c in good])),
                err=float(np.median([c.err for c in good]))))
        else:
            rows.append(RateRow(delta=delta, rule=rule_name,
                                iters=float("nan"), err=float("nan")))
    table = RateTable(rows)
    if out_dir is not None:
        table.to_csv(out_dir / "table.csv")
    return SweepOutcome(rule=rule_name, table=table, cells=cells)


def fit_loglog_slope(deltas, errs):
    """Least-squares slope of log(err) against log(delta); None if fewer than
    two usable (positive, finite) points."""
    d = np.asarray(deltas, float)
    e = np.asarray(errs, float)
    mask = (d > 0) & (e > 0) & np.isfinite(d) & np.isfinite(e)
    if mask.sum() < 2:
        return None
    return float(np.polyfit(np.log(d[mask]), np.log(e[mask]), 1)[0])


_PLOT_SCRIPT = """\
#!/usr/bin/env python3
\"\"\"Plot the rate sweep written next to this script (rate.csv).\"\"\"
import csv
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = Path(__file__).resolve().parent
deltas, errs = [], []
with open(here / "rate.csv") as fh:
    for row in csv.DictReader(r for r in fh if not r.startswith("#")):
        deltas.append(float(row["delta"]))
        errs.append(float(row["err"]))

fig, ax = plt.subplots(figsize=(5, 4))
ax.loglog(deltas, errs, "o-", label="reconstruction error")
ax.loglog(deltas, [d ** 0.5 for d in deltas], "k--", label="sqrt(delta)")
ax.set_xlabel("noise level delta")
ax.set_ylabel("error")
ax.legend()
fig.tight_layout()
fig.savefig(here / "rate.png", dpi=150)
print("wrote", here / "rate.png")
"""


def emit_plot_data(table: RateTable, out_dir) -> dict:
    """Write ``rate.csv`` (log-log pairs plus a fitted-slope summary line)
    and a ready-to-run matplotlib script ``plot_rate.py``.

    Returns {"slope": float | None, "rate_csv": path, "script": path};
    raises ValueError on an empty table.
    """
    if not table.rows:
        raise ValueError("cannot emit plot data for an empty table")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    slope = fit_loglog_slope([r.delta for r in table.rows],
                             [r.err for r in table.rows])
    rate_csv = out_dir / "rate.csv"
    with open(rate_csv, "w") as fh:
        fh.write("delta,err,log10_delta,log10_err\n")
        for row in table.rows:
            if row.err > 0 and np.isfinite(row.err):
                fh.write(f"{row.delta:.17g},{row.err:.17g},"
                         f"{math.log10(row.delta):.17g},{math.log10(row.err):.17g}\n")
        fh.write(f"# lsq slope of log err vs log delta: "
                 f"{'n/a' if slope is None else format(slope, '.6g')}\n")
    script = out_dir / "plot_rate.py"
    with open(script, "w") as fh:
        fh.write(_PLOT_SCRIPT)
    return {"slope": slope, "rate_csv": rate_csv, "script": script}
