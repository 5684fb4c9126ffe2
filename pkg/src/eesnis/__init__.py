"""Estimating-equation self-normalized importance sampling (EE-SNIS).

The estimator solves a piecewise-linear estimating equation built from two
samples, one drawn where f exceeds the mean and one where it falls short.
Reference estimators, oracle test problems and replication statistics
live alongside it.
"""

from .core import (
    Integrand,
    RandomStream,
    UnnormalizedTarget,
    WeightedSample,
    affine_integrand,
    constant_integrand,
    derive_stream,
    draw_weighted_sample,
    effective_sample_size,
    stream_key,
)
from .ee_snis import (
    EeSnisReport,
    PsiFunction,
    build_psi,
    coupled_ee_snis_estimate,
    ee_snis_estimate,
    psi_derivative,
    psi_eval,
    recenter,
    sandwich_variance,
    solve_root,
)
from .errors import (
    AllReplicationsFailed,
    AtBreakpoint,
    DegenerateProblem,
    DimensionMismatch,
    EmptySide,
    EstimationError,
    NonExistence,
    NonFiniteWeight,
    QuadratureFailure,
    SupportViolation,
    ZeroWeightSum,
)
from .estimators import (
    CenteringFunction,
    EstimatorReport,
    coupled_snis_estimate,
    coupling_objective,
    dpis_estimate,
    gpois_estimate,
    gtabi_estimate,
    mc_estimate,
    ois_estimate,
    pois_estimate,
    snis_estimate,
    split_budget,
    tabi4_estimate,
    tabi_estimate,
)
from .problems import (
    DefensiveMixtureProposal,
    OracleValues,
    ProblemSpec,
    discrete_problem,
    gaussian_problem,
    get_problem,
    optimal_pair,
    optimal_proposal,
    oracle_values,
    population_psi,
    population_root,
    snis_optimal_proposal,
)
from .proposals import (
    CategoricalProposal,
    CoupledProposal,
    GaussianProposal,
    GaussianRampProposal,
    GridProposal,
    MixtureProposal,
    Proposal,
    UniformProposal,
)
from .quadrature import adaptive_simpson
from .stats import ReplicationSummary, RunningMoments, ks_normality, rmse_slope, run_replications

__all__ = [
    "AllReplicationsFailed",
    "AtBreakpoint",
    "CategoricalProposal",
    "CenteringFunction",
    "CoupledProposal",
    "DefensiveMixtureProposal",
    "DegenerateProblem",
    "DimensionMismatch",
    "EeSnisReport",
    "EmptySide",
    "EstimationError",
    "EstimatorReport",
    "GaussianProposal",
    "GaussianRampProposal",
    "GridProposal",
    "Integrand",
    "MixtureProposal",
    "NonExistence",
    "NonFiniteWeight",
    "OracleValues",
    "ProblemSpec",
    "Proposal",
    "PsiFunction",
    "QuadratureFailure",
    "RandomStream",
    "ReplicationSummary",
    "RunningMoments",
    "SupportViolation",
    "UniformProposal",
    "UnnormalizedTarget",
    "WeightedSample",
    "ZeroWeightSum",
    "adaptive_simpson",
    "affine_integrand",
    "build_psi",
    "constant_integrand",
    "coupled_ee_snis_estimate",
    "coupled_snis_estimate",
    "coupling_objective",
    "derive_stream",
    "discrete_problem",
    "dpis_estimate",
    "draw_weighted_sample",
    "ee_snis_estimate",
    "effective_sample_size",
    "gaussian_problem",
    "get_problem",
    "gpois_estimate",
    "gtabi_estimate",
    "ks_normality",
    "mc_estimate",
    "ois_estimate",
    "optimal_pair",
    "optimal_proposal",
    "oracle_values",
    "pois_estimate",
    "population_psi",
    "population_root",
    "psi_derivative",
    "psi_eval",
    "recenter",
    "rmse_slope",
    "run_replications",
    "sandwich_variance",
    "snis_estimate",
    "snis_optimal_proposal",
    "solve_root",
    "split_budget",
    "stream_key",
    "tabi4_estimate",
    "tabi_estimate",
]

__version__ = "0.1.0"
