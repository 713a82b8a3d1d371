"""Fitted finite-volume solver for the generalized Black-Scholes equation on (0, 1)."""

__version__ = "0.1.0"

from .mesh import ConfigurationError, Mesh, power_graded, uniform  # noqa: E402
from .model import (  # noqa: E402
    BullSpread,
    Butterfly,
    Call,
    CashOrNothing,
    Constant,
    DomainError,
    LinearInX,
    MarketModel,
    Put,
    SinusoidalInT,
    from_x,
    to_x,
)
from .solver import Solution, SolverConfig, solve_evolution  # noqa: E402

__all__ = [
    "BullSpread",
    "Butterfly",
    "Call",
    "CashOrNothing",
    "ConfigurationError",
    "Constant",
    "DomainError",
    "LinearInX",
    "MarketModel",
    "Mesh",
    "Put",
    "SinusoidalInT",
    "Solution",
    "SolverConfig",
    "from_x",
    "power_graded",
    "solve_evolution",
    "to_x",
    "uniform",
]
