"""l1-regularized segmentation of time series into piecewise-constant mean and variance."""
from .core import (
    ConvergenceError,
    DegenerateProblemError,
    DomainError,
    Hyperparams,
    InputError,
    Kind,
    PiecewiseConstantSignal,
    Segmentation,
    SolverOptions,
    SolverReport,
    TimeSeries,
    from_canonical,
    to_canonical,
)
from .joint import JointEstimate, neg_log_likelihood, solve_joint
from .multivar import CovSequence, psd_project, solve_cov_fit
from .reference import oracle_l1_tv, oracle_tv1d_dual
from .segmenter import extract_changepoints, refit_segments
from .tvdenoise import empirical_mean, kkt_residual_mean, lambda_max_mean, solve_mean
from .variance import empirical_variance, kkt_residual_eta, lambda_max_variance, solve_variance

__version__ = "0.1.0"
