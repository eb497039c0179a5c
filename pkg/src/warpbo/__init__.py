"""Bayesian optimisation with expert priors folded into the GP kernel by CDF warping."""

from warpbo.acquisition import (
    AcquisitionKind,
    AcquisitionSpec,
    MaximizerBudget,
    Proposal,
    UcbMode,
    expected_improvement,
    maximize_acquisition,
    ucb_gamma,
)
from warpbo.bench import BENCHMARKS, Benchmark, branin, gaussian3d, levy2d
from warpbo.driver import (
    BoConfig,
    Direction,
    ObjectiveError,
    RunResult,
    initial_design,
    make_shifted_prior,
    run_bo,
    run_prior_search,
)
from warpbo.gp import Dataset, FitError, GpModel, KernelParams, fit, fit_lengthscale_mle
from warpbo.special import DomainError
from warpbo.warp import PriorKind, PriorSpec, WarpMap, cdf, inverse_cdf, warp_point

__version__ = "0.1.0"
