"""Mirror-descent Landweber solvers for ill-posed inverse problems.

The package is organized around five layers:

* :mod:`mirrorsolve.grids` -- quadrature-weighted grid functions and dense
  integral operators with exact discrete adjoints;
* :mod:`mirrorsolve.regularizers` -- strongly convex regularizers with
  closed-form mirror maps, conjugates, and Bregman distances;
* :mod:`mirrorsolve.operators` -- forward maps (integral operator, elliptic
  coefficient-to-solution map) with derivatives and adjoints;
* :mod:`mirrorsolve.landweber` -- the dual-space gradient iteration with
  pluggable step-size and stopping rules plus diagnostics;
* :mod:`mirrorsolve.smd` -- the stochastic block variant for systems with
  exact data.

:mod:`mirrorsolve.experiments` and :mod:`mirrorsolve.cli` wrap everything in
reproducible rate benchmarks.
"""

from .grids import (
    DenseOperator,
    Grid,
    GridFunction,
    GridMismatchError,
    add_noise,
    inner,
    norm_l1,
    norm_l2,
    norm_linf,
    power_iteration_norm,
)
from .landweber import (
    AdaptiveStep,
    APrioriStop,
    ConstantStep,
    DiscrepancyStop,
    IterateRecord,
    IterationLimitError,
    MaxIterStop,
    MinimalErrorStep,
    RunResult,
    run,
    step_bounds,
    step_size,
    write_iterates_csv,
)
from .operators import (
    EllipticCoefficient,
    EllipticSolveError,
    EllipticSolver,
    ForwardOperator,
    LinearIntegral,
)
from .regularizers import (
    DomainError,
    ElasticNet,
    EntropySimplex,
    PrimalDualPair,
    QuadraticBox,
    Regularizer,
)
from .smd import (
    ConstantSchedule,
    PolynomialSchedule,
    SmdRecord,
    SmdRun,
    SourcedInstance,
    SystemProblem,
    build_sourced_instance,
    smd_run,
    smd_step,
)

__version__ = "0.1.0"
