"""Primal-dual inertial dynamics with vanishing damping.

The usual pipeline is problem -> saddle point -> trajectory -> diagnostics::

    >>> import numpy as np
    >>> from pdavd import ProblemInstance, QuadraticObjective, LinearMap, find_saddle
    >>> p = ProblemInstance(QuadraticObjective(np.eye(2)), LinearMap([[1.0, 1.0]]), [1.0])
    >>> find_saddle(p).lambda_star
    array([-0.5])
"""
from .diagnostics import cumulative_integrals, lyapunov_report, sample_table
from .dynamics import SolverParams, SystemState, validate_params, vector_field
from .errors import (
    ConfigError,
    DimensionError,
    IntegrationError,
    NoSaddlePointError,
    OracleError,
    ParameterError,
    PdavdError,
)
from .integrator import Trajectory, backend_name, integrate, sample_schedule
from .oracle import SaddlePoint, find_saddle
from .problem import LinearMap, ProblemInstance, QuadraticObjective, compose_multiblock, random_qp
from .rates import fit_rate, fit_slope, little_o_check

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DimensionError",
    "IntegrationError",
    "LinearMap",
    "NoSaddlePointError",
    "OracleError",
    "ParameterError",
    "PdavdError",
    "ProblemInstance",
    "QuadraticObjective",
    "SaddlePoint",
    "SolverParams",
    "SystemState",
    "Trajectory",
    "backend_name",
    "compose_multiblock",
    "cumulative_integrals",
    "find_saddle",
    "fit_rate",
    "fit_slope",
    "integrate",
    "little_o_check",
    "lyapunov_report",
    "random_qp",
    "sample_schedule",
    "sample_table",
    "validate_params",
    "vector_field",
]
