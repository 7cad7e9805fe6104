"""Split-step spectral solvers for semilinear evolution equations."""
from .errors import (
    ConfigError,
    InsufficientDataError,
    InvalidSchemeError,
    NeutralityError,
    NonFiniteStateError,
    OracleNotConvergedError,
    ReferenceNotConvergedError,
)
from .schemes import (
    SolveReport,
    SplittingScheme,
    StepFunctions,
    evolve,
    make_scheme,
    step,
    step_functions,
    substeps,
    validate_scheme,
)
from .torus import TorusField, TorusGrid

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "InsufficientDataError",
    "InvalidSchemeError",
    "NeutralityError",
    "NonFiniteStateError",
    "OracleNotConvergedError",
    "ReferenceNotConvergedError",
    "SolveReport",
    "SplittingScheme",
    "StepFunctions",
    "TorusField",
    "TorusGrid",
    "evolve",
    "make_scheme",
    "step",
    "step_functions",
    "substeps",
    "validate_scheme",
]
