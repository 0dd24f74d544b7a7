"""Markovian multivariate Hawkes population processes.

Exact transient and stationary joint moments, joint probability
transforms, finite-difference and Monte Carlo baselines, and the
nearly-unstable Gamma limit.
"""

from .model import (
    DeterministicMark,
    ExponentialMark,
    HawkesModel,
    MarkLaw,
    SymmetricModel,
    ZeroMark,
    as_symmetric,
    branching_matrix,
    check_stability,
    load_model,
    parse_model_config,
    symmetric_theta_sigma,
)
from .moments import (
    MomentIndex,
    MomentSystem,
    MomentTable,
    assemble_system,
    dimension,
    enumerate_indices,
    factorial_to_raw,
    hawkes_count_moments,
    index_label,
    indices_of_order,
    stationary_moments,
    stationary_second_order,
    transient_moments,
)
from .numerics import OdeConfig

__all__ = [
    "DeterministicMark",
    "ExponentialMark",
    "HawkesModel",
    "MarkLaw",
    "MomentIndex",
    "MomentSystem",
    "MomentTable",
    "OdeConfig",
    "SymmetricModel",
    "ZeroMark",
    "as_symmetric",
    "assemble_system",
    "branching_matrix",
    "check_stability",
    "dimension",
    "enumerate_indices",
    "factorial_to_raw",
    "hawkes_count_moments",
    "index_label",
    "indices_of_order",
    "load_model",
    "parse_model_config",
    "stationary_moments",
    "stationary_second_order",
    "symmetric_theta_sigma",
    "transient_moments",
]

__version__ = "0.1.0"
