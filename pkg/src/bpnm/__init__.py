"""Bayesian probabilistic numerical methods.

Series priors over Chebyshev expansions, information operators, closed-form
Gaussian conditioning, sampling-based conditioning on nonlinear information
(tempered SMC and parallel tempering), evidence estimation, pipelines of
methods and decision-theoretic risk checks.
"""

from .chebbasis import BasisSet, SeriesState
from .conjugate import GaussianPosterior, KernelSpec, bq_posterior, collocation_posterior, gaussian_evidence
from .disintegration import MalaConfig, RelaxationKernel, TemperatureSchedule, pt_nd, smc_nd
from .evidence import bayes_factor, estimate_log_evidence
from .infoops import Functional, InformationOperator
from .seriesprior import ScaleSequence, SeriesPrior

__version__ = "0.1.0"

__all__ = [
    "BasisSet",
    "SeriesState",
    "GaussianPosterior",
    "KernelSpec",
    "bq_posterior",
    "collocation_posterior",
    "gaussian_evidence",
    "MalaConfig",
    "RelaxationKernel",
    "TemperatureSchedule",
    "pt_nd",
    "smc_nd",
    "bayes_factor",
    "estimate_log_evidence",
    "Functional",
    "InformationOperator",
    "ScaleSequence",
    "SeriesPrior",
]
