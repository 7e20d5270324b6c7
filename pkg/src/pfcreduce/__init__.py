"""Dimension reduction for multivariate regression through growth-curve
models: covariance-triple estimators, principal fitted components,
likelihood-based eigenvector subset selection for structured covariances,
and a reproducible Monte Carlo verification harness.
"""

from .errors import DataError, NumericalError, UsageError
from .estimators import (
    CovarianceTriple,
    DataSet,
    PopulationModel,
    covariance_triple,
    expected_covariances,
    expected_quadratic_form,
    moment_estimator,
    sigma_from_res,
    structured_covariance,
    structured_precision,
)
from .matalg import (
    EigDecomp,
    kron,
    logdet_pd,
    orthonormal_complement,
    orthonormalize,
    ppo,
    subspace_distance,
    sym_eig,
    vec,
)
from .models import (
    IsotonicFit,
    StructuredFit,
    SubspaceEstimate,
    fit_moment,
    fit_pc,
    fit_pfc_isotonic,
    fit_res_inv_fit,
    fit_structured_exhaustive,
    fit_structured_sequential,
    fit_vs_res_eigen,
    profile_loglik_structured,
    sse_from_triple,
    sse_isotonic,
    transform_general_sigma,
)
from .simulate import (
    ChanceBaseline,
    RecoveryRow,
    SimConfig,
    SimReport,
    chance_baseline,
    generate_dataset,
    random_population,
    recovery_experiment,
    verify_expectations,
)

__version__ = "0.1.0"

__all__ = [
    "ChanceBaseline",
    "CovarianceTriple",
    "DataError",
    "DataSet",
    "EigDecomp",
    "IsotonicFit",
    "NumericalError",
    "PopulationModel",
    "RecoveryRow",
    "SimConfig",
    "SimReport",
    "StructuredFit",
    "SubspaceEstimate",
    "UsageError",
    "chance_baseline",
    "covariance_triple",
    "expected_covariances",
    "expected_quadratic_form",
    "fit_moment",
    "fit_pc",
    "fit_pfc_isotonic",
    "fit_res_inv_fit",
    "fit_structured_exhaustive",
    "fit_structured_sequential",
    "fit_vs_res_eigen",
    "generate_dataset",
    "kron",
    "logdet_pd",
    "moment_estimator",
    "orthonormal_complement",
    "orthonormalize",
    "ppo",
    "profile_loglik_structured",
    "random_population",
    "recovery_experiment",
    "sigma_from_res",
    "sse_from_triple",
    "sse_isotonic",
    "structured_covariance",
    "structured_precision",
    "subspace_distance",
    "sym_eig",
    "transform_general_sigma",
    "vec",
    "verify_expectations",
]
