"""Greedy Bayesian experimental design with near-optimality certificates.

The package selects a bounded multiset of noisy linear experiments to
minimize the posterior error of a linear target of the parameters, under
A (trace), E (spectral), or D (log-volume) costs. Greedy selection comes
with computable suboptimality certificates based on approximate
supermodularity, plus brute-force oracles for auditing them on small pools.
"""

__version__ = "0.1.0"

from .certificates import (
    AlphaCertificate,
    DGuarantee,
    EpsilonCertificate,
    alpha_bound_a,
    alpha_bound_tightened,
    alpha_certificate_from_bounds,
    alpha_guarantee,
    d_guarantee,
    epsilon_bound_e,
    epsilon_certificate_from_bounds,
    epsilon_guarantee,
    equivalent_alpha,
    equivalent_epsilon,
)
from .criteria import Criterion, a_cost, cost, d_cost, e_cost, gain
from .datagen import (
    RatingsTable,
    SynthSpec,
    build_recsys_pool,
    evaluate_recsys,
    load_ratings,
    noise_var_for_snr_db,
    random_design,
    save_ratings,
    synth_pool,
    synth_ratings,
)
from .errors import (
    AllDegenerate,
    DegenerateFactor,
    DimensionMismatch,
    EmptyTraining,
    InternalConsistencyError,
    InvalidAlpha,
    MissingObservation,
    NotPositiveDefinite,
    OptidesignError,
    ParseError,
    PoolExhausted,
    RankDeficientTarget,
    TooLarge,
    UnknownExperimentId,
)
from .greedy import GreedyStep, GreedyTrace, greedy_design
from .model import (
    Design,
    EstimateResult,
    Experiment,
    Pool,
    error_covariance,
    estimate,
    information_matrix,
    load_pool,
    make_experiment,
    pool_from_dict,
    pool_hash,
    pool_to_dict,
    save_pool,
)
from .oracle import (
    AffineEstimator,
    OptimalityReport,
    OracleReport,
    estimator_optimality_check,
    exhaustive_alpha,
    exhaustive_epsilon,
    exhaustive_tables,
    monte_carlo_mse,
    optimal_design_bruteforce,
)

__all__ = [
    "__version__",
    "AffineEstimator",
    "AllDegenerate",
    "AlphaCertificate",
    "Criterion",
    "DGuarantee",
    "DegenerateFactor",
    "Design",
    "DimensionMismatch",
    "EmptyTraining",
    "EpsilonCertificate",
    "EstimateResult",
    "Experiment",
    "GreedyStep",
    "GreedyTrace",
    "InternalConsistencyError",
    "InvalidAlpha",
    "MissingObservation",
    "NotPositiveDefinite",
    "OptidesignError",
    "OptimalityReport",
    "OracleReport",
    "ParseError",
    "Pool",
    "PoolExhausted",
    "RankDeficientTarget",
    "RatingsTable",
    "SynthSpec",
    "TooLarge",
    "UnknownExperimentId",
    "a_cost",
    "alpha_bound_a",
    "alpha_bound_tightened",
    "alpha_certificate_from_bounds",
    "alpha_guarantee",
    "build_recsys_pool",
    "cost",
    "d_cost",
    "d_guarantee",
    "e_cost",
    "epsilon_bound_e",
    "epsilon_certificate_from_bounds",
    "epsilon_guarantee",
    "equivalent_alpha",
    "equivalent_epsilon",
    "error_covariance",
    "estimate",
    "estimator_optimality_check",
    "evaluate_recsys",
    "exhaustive_alpha",
    "exhaustive_epsilon",
    "exhaustive_tables",
    "gain",
    "greedy_design",
    "information_matrix",
    "load_pool",
    "load_ratings",
    "make_experiment",
    "monte_carlo_mse",
    "noise_var_for_snr_db",
    "optimal_design_bruteforce",
    "pool_from_dict",
    "pool_hash",
    "pool_to_dict",
    "random_design",
    "save_pool",
    "save_ratings",
    "synth_pool",
    "synth_ratings",
]
