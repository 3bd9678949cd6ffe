"""Higher-order antibunching from short-time Heisenberg solutions.

The symbolic pipeline runs ``builtin``/``parse_system`` -> ``taylor_solve`` ->
``moment_report``.  The numerical oracle in :mod:`hoa.oracle` checks it
independently in a truncated Fock space.
"""

from .algebra import OperatorPoly, commutator, dagger, multiply, normal_order, truncate_order
from .dsl import SystemDef, builtin, parse_system, render_system
from .errors import HoaError
from .oracle import OracleResult, run_oracle
from .moments import (
    AmplitudePoly,
    MomentReport,
    abs_alpha_sq,
    chain_check,
    criterion_A,
    criterion_d,
    criterion_R,
    expect_coherent_vacuum,
    factorial_moment,
    mean_power,
    moment_report,
)
from .scalars import GaussianRational, ScalarCoeff
from .solver import TimeSeriesSolution, heisenberg_derivative, power_of_solution, taylor_solve

__version__ = "0.1.0"

__all__ = [
    "AmplitudePoly",
    "GaussianRational",
    "HoaError",
    "MomentReport",
    "OperatorPoly",
    "OracleResult",
    "ScalarCoeff",
    "SystemDef",
    "TimeSeriesSolution",
    "abs_alpha_sq",
    "builtin",
    "chain_check",
    "commutator",
    "criterion_A",
    "criterion_R",
    "criterion_d",
    "dagger",
    "expect_coherent_vacuum",
    "factorial_moment",
    "heisenberg_derivative",
    "mean_power",
    "moment_report",
    "multiply",
    "normal_order",
    "parse_system",
    "power_of_solution",
    "render_system",
    "run_oracle",
    "taylor_solve",
    "truncate_order",
]
