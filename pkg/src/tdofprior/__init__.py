"""Loss-based objective priors for heavy-tail degrees of freedom.

Core functionality for the multivariate t distribution and the bivariate
t-copula: divergence grids, prior construction, Metropolis-within-Gibbs
posterior samplers, a frequentist validation harness and data-analysis
pipelines.  A FastAPI service (:mod:`tdofprior.service`) exposes the
pipelines; the CLI (:mod:`tdofprior.cli`) is a thin client of that service.
"""

from .divergence import KLGrid, McEstimate, build_kl_grid, kl_copula_is, kl_copula_mc, kl_normal_t, kl_t_t
from .errors import (
    DataError,
    DegenerateWeightsError,
    DomainError,
    NotPositiveDefiniteError,
    NumericError,
    QuadratureError,
    TdofError,
)
from .mathcore import QuadratureSpec, SpdMatrix
from .mcmc import ChainOutput, McmcConfig, PosteriorSummary, run_copula_sampler, run_mvt_sampler, summarize
from .models import CopulaModel, DofSupport, MarginSpec, MvtParams
from .pipelines import (
    AnalysisOptions,
    FrequentistReport,
    ScenarioSpec,
    kendall_tau,
    reproduce_tables,
    run_copula_analysis,
    run_frequentist_study,
    run_mvt_analysis,
    tail_lambda,
)
from .priors import PriorTable, RhoBucket, build_prior_copula, build_prior_mvt, normalize_on_support

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "AnalysisOptions",
    "ChainOutput",
    "CopulaModel",
    "DataError",
    "DegenerateWeightsError",
    "DofSupport",
    "DomainError",
    "FrequentistReport",
    "KLGrid",
    "MarginSpec",
    "McEstimate",
    "McmcConfig",
    "MvtParams",
    "NotPositiveDefiniteError",
    "NumericError",
    "PosteriorSummary",
    "PriorTable",
    "QuadratureError",
    "QuadratureSpec",
    "RhoBucket",
    "ScenarioSpec",
    "SpdMatrix",
    "TdofError",
    "build_kl_grid",
    "build_prior_copula",
    "build_prior_mvt",
    "kendall_tau",
    "kl_copula_is",
    "kl_copula_mc",
    "kl_normal_t",
    "kl_t_t",
    "normalize_on_support",
    "reproduce_tables",
    "run_copula_analysis",
    "run_copula_sampler",
    "run_frequentist_study",
    "run_mvt_analysis",
    "run_mvt_sampler",
    "summarize",
    "tail_lambda",
]
