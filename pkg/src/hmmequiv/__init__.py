"""Equivalence, local equivalence and exponential families of hidden Markov models
given as Y-valued transition matrices."""

from .equivalence import are_equivalent, are_equivalent_stationary, duplicate_state, intertwiner, permuted
from .errors import (
    ConditionError,
    CrossCheckError,
    EnumerationCapError,
    HmmEquivError,
    IndeterminateError,
    ReducibleError,
    ValidationError,
)
from .expfam import GeneratorSet, at, divergence, g1_project, law_derivative, potential, potential_gradient
from .indep import check_identifiability, decompose, ert_generators, indep_tangent_report, two_hidden_state_report
from .model import IndepModel, YTransitionModel, from_function, from_independent, stationary, validate
from .observables import exact_output_law, observability_profile, pk_map, reachability_profile
from .settings import DEFAULT, NumericSettings
from .tangent import build_generators, tangent_report, two_state_singular_generators

__version__ = "0.1.0"

__all__ = [
    "ConditionError",
    "CrossCheckError",
    "DEFAULT",
    "EnumerationCapError",
    "GeneratorSet",
    "HmmEquivError",
    "IndepModel",
    "IndeterminateError",
    "NumericSettings",
    "ReducibleError",
    "ValidationError",
    "YTransitionModel",
    "are_equivalent",
    "are_equivalent_stationary",
    "at",
    "build_generators",
    "check_identifiability",
    "decompose",
    "divergence",
    "duplicate_state",
    "ert_generators",
    "exact_output_law",
    "from_function",
    "from_independent",
    "g1_project",
    "indep_tangent_report",
    "intertwiner",
    "law_derivative",
    "observability_profile",
    "permuted",
    "pk_map",
    "potential",
    "potential_gradient",
    "reachability_profile",
    "stationary",
    "tangent_report",
    "two_hidden_state_report",
    "two_state_singular_generators",
    "validate",
]
