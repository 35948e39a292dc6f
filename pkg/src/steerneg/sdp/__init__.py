"""Block semidefinite programming: problem types, interior-point solver, SDPA I/O."""

from .lmi import LmiProblem
from .problem import (
    BLOCK_KINDS,
    COMPLEX_PSD,
    DUAL_INFEASIBLE,
    FREE,
    NUMERICAL_FAILURE,
    OPTIMAL,
    PRIMAL_INFEASIBLE,
    REAL_PSD,
    Block,
    LinearFunctional,
    SdpProblem,
    SdpSolution,
    embed_complex,
    realify,
    unembed_real,
    unrealify_values,
)
from .sdpa import export_sdpa, objective_from_sdpa_value, parse_sdpa, read_sdpa, sdpa_to_problem, write_sdpa
from .solver import SolverSettings, solve

__all__ = [
    "BLOCK_KINDS", "COMPLEX_PSD", "DUAL_INFEASIBLE", "FREE", "NUMERICAL_FAILURE", "OPTIMAL",
    "PRIMAL_INFEASIBLE", "REAL_PSD", "Block", "LinearFunctional", "LmiProblem", "SdpProblem",
    "SdpSolution", "SolverSettings", "embed_complex", "export_sdpa", "objective_from_sdpa_value", "parse_sdpa", "read_sdpa",
    "realify", "sdpa_to_problem", "solve", "unembed_real", "unrealify_values", "write_sdpa",
]
