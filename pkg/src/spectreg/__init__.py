"""Spectral-regularization kernel regression laboratory.

Core pieces: eigenvalue profiles and their counting functionals (`spectrum`),
regularization filter families (`filters`), synthetic Mercer-expansion problems
(`mercer`), the spectral-filter estimator (`estimator`), the rate calculus and
Monte-Carlo rate harness (`rates`), and minimax lower-bound certificates
(`lowerbound`). The `spectreg` console script drives everything from YAML
configs.
"""

from __future__ import annotations

from .errors import (AssumptionError, ConfigError, ConstructionError,
                     DataError, SpectregError)
from .estimator import FitResult, SpectralDesign, eigencoeffs, fit, fit_mercer, predict
from .filters import (FilterFamily, filter_from_dict, iterated_tikhonov, landweber,
                      measure_qualification, spectral_cutoff, tikhonov,
                      verify_constants)
from .lowerbound import (AlternativeFamily, FanoReport, PackingCertificate,
                         build_alternatives, choose_m, fano_report,
                         generate_packing, kl_divergence, verify_packing)
from .mercer import (Dataset, MercerProblem, NoiseModel, SourceParams,
                     bounded_uniform, error_norm, gaussian, make_problem, sample)
from .rates import (ModelParams, RateReport, envelope, grid_error_profile,
                    holdout_select, lambda_rule, run_rate_experiment,
                    theoretical_rate)
from .spectrum import (SpectrumProfile, count_F, count_above, effective_dimension,
                       explicit, gee, gee_inverse, plateau, polylog, polynomial,
                       regime_switch, verify_decay)

__all__ = [
    "AssumptionError", "ConfigError", "ConstructionError", "DataError",
    "SpectregError",
    "SpectrumProfile", "count_F", "count_above", "effective_dimension",
    "explicit", "gee", "gee_inverse", "plateau", "polylog", "polynomial",
    "regime_switch", "verify_decay",
    "FilterFamily", "tikhonov", "spectral_cutoff", "landweber",
    "iterated_tikhonov", "filter_from_dict", "verify_constants",
    "measure_qualification",
    "MercerProblem", "Dataset", "SourceParams", "NoiseModel", "gaussian",
    "bounded_uniform", "make_problem", "sample", "error_norm",
    "FitResult", "SpectralDesign", "fit", "fit_mercer", "eigencoeffs", "predict",
    "ModelParams", "RateReport", "lambda_rule", "theoretical_rate", "envelope",
    "run_rate_experiment", "grid_error_profile", "holdout_select",
    "PackingCertificate", "AlternativeFamily", "FanoReport", "generate_packing",
    "verify_packing", "choose_m", "build_alternatives", "kl_divergence",
    "fano_report",
]

__version__ = "0.1.0"
