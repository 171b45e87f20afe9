"""The joint outcome and mediator model."""

from .likelihood import (
    QuadratureError,
    loglik_contributions,
    loglik_group1,
    loglik_group2,
    loglik_total,
    outcome_mean,
)
from .mechanisms import LOD, Exponential, ZeroMechanism
from .params import (
    NO_ZERO_INFLATION,
    PARAM_NAMES,
    ModelConfig,
    ModelParams,
    QuadratureSpec,
    SubjectData,
    SubjectRecord,
    as_subject_data,
)

__all__ = [
    "PARAM_NAMES",
    "NO_ZERO_INFLATION",
    "ModelParams",
    "ModelConfig",
    "QuadratureSpec",
    "SubjectRecord",
    "SubjectData",
    "as_subject_data",
    "ZeroMechanism",
    "LOD",
    "Exponential",
    "QuadratureError",
    "outcome_mean",
    "loglik_group1",
    "loglik_group2",
    "loglik_contributions",
    "loglik_total",
]
