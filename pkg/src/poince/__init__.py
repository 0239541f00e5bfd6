"""Poincare chaos expansions by sparse regression, with global sensitivity
indices (Sobol' and derivative-based) computed from the coefficients."""

from .marginals import (Marginal, PreparedInput, StandardizationMap,
                        make_marginal, prepare_input, prepare_inputs,
                        standardize, truncate)
from .poincare1d import (PoincareBasis1D, build_analytic_hermite,
                         build_analytic_uniform, build_basis, build_fem)
from .basis import BasisSet, hyperbolic, total_degree
from .design import ExperimentalDesign, lhs_maximin, mc_sample
from .solver import (FitResult, RegressionProblem, degree_adaptive_fit,
                     hybrid_lars, loo_corrected, ols)
from .expansion import (Expansion, ExpansionSetup, average_der_expansions,
                        eval_surrogate, expansion_from_json,
                        expansion_to_json, fit_constant_residual, fit_poince,
                        fit_poince_der, fit_projection_mc)
from .sensitivity import (SensitivityReport, dgsm_from_coefficients,
                          dgsm_mc_reference, dgsm_upper_bound,
                          normalize_report, partial_variances, relmse,
                          report_from_expansion, total_variance)

__version__ = "0.1.0"

__all__ = [
    "Marginal", "PreparedInput", "StandardizationMap", "make_marginal",
    "prepare_input", "prepare_inputs", "standardize", "truncate",
    "PoincareBasis1D", "build_analytic_hermite", "build_analytic_uniform",
    "build_basis", "build_fem",
    "BasisSet", "hyperbolic", "total_degree",
    "ExperimentalDesign", "lhs_maximin", "mc_sample",
    "FitResult", "RegressionProblem", "degree_adaptive_fit", "hybrid_lars",
    "loo_corrected", "ols",
    "Expansion", "ExpansionSetup", "average_der_expansions", "eval_surrogate",
    "expansion_from_json", "expansion_to_json", "fit_constant_residual",
    "fit_poince", "fit_poince_der", "fit_projection_mc",
    "SensitivityReport", "dgsm_from_coefficients", "dgsm_mc_reference",
    "dgsm_upper_bound", "normalize_report", "partial_variances", "relmse",
    "report_from_expansion", "total_variance",
    "__version__",
]
