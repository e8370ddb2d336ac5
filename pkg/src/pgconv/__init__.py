"""Exact-oracle policy optimization for tabular MDPs, zero-sum games and LQR."""

__version__ = "0.1.0"

from . import core_numeric, lqr, markov_game, matrix_game, pg_single_agent, tabular_mdp  # noqa: E402
from .errors import (  # noqa: E402
    ConfigError,
    ConvergenceError,
    DimensionError,
    DomainError,
    NumericError,
    PgconvError,
    ReducibilityError,
    StabilityError,
    StabilizabilityError,
)
from .kernels import BACKEND  # noqa: E402

__all__ = [
    "BACKEND",
    "ConfigError",
    "ConvergenceError",
    "DimensionError",
    "DomainError",
    "NumericError",
    "PgconvError",
    "ReducibilityError",
    "StabilityError",
    "StabilizabilityError",
    "core_numeric",
    "lqr",
    "markov_game",
    "matrix_game",
    "pg_single_agent",
    "tabular_mdp",
]
