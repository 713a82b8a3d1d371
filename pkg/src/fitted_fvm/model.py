"""Market model, the S <-> x change of variables, and the transformed-equation
coefficients.

The price V(S, tau) on S in (0, inf) is mapped to u(x, t) on (0, 1) by

    x = S / (S + P_m),   u = V / (S + P_m),

where P_m is the mesh parameter.  In divergent form the transformed equation is

    u_t - (x(1-x) (a u' + b u))' + c u = 0

with a = sigma^2 x(1-x) / 2, b = r - d + sigma^2 (2x - 1) and c as in
:func:`coeff_c`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np


class DomainError(ValueError):
    """Raised when an argument lies outside the domain of an operation."""


# -- coefficient specifications -------------------------------------------


def _fill(x, t, val):
    """Broadcast ``val`` against the shapes of x and t; scalars stay floats."""
    if np.ndim(x) or np.ndim(t):
        return np.zeros(np.broadcast(x, t).shape) + val
    return float(val)


@dataclass(frozen=True)
class Constant:
    value: float

    def __call__(self, x, t):
        return _fill(x, t, self.value)

    def dx(self, x, t):
        return _fill(x, t, 0.0)

    def integral(self, x, t):
        """Closed form of int_0^t value(x, s) ds."""
        return self.value * t

    @property
    def time_constant(self) -> bool:
        return True

    @property
    def space_constant(self) -> bool:
        return True

    def lower_bound(self) -> float:
        return self.value


@dataclass(frozen=True)
class SinusoidalInT:
    """``base + amplitude * sin(frequency * t)``."""

    base: float
    amplitude: float
    frequency: float

    def __call__(self, x, t):
        return _fill(x, t, self.base + self.amplitude * np.sin(self.frequency * np.asarray(t, dtype=float)))

    def dx(self, x, t):
        return _fill(x, t, 0.0)

    def integral(self, x, t):
        if self.frequency == 0.0:
            return self.base * t
        w = self.frequency
        return self.base * t + self.amplitude * (1.0 - np.cos(w * t)) / w

    @property
    def time_constant(self) -> bool:
        return self.amplitude == 0.0 or self.frequency == 0.0

    @property
    def space_constant(self) -> bool:
        return True

    def lower_bound(self) -> float:
        return self.base - abs(self.amplitude)


@dataclass(frozen=True)
class LinearInX:
    """``slope * x``; e.g. d = 0.06 S/(S+E) becomes LinearInX(0.06) when P_m = E."""

    slope: float

    def __call__(self, x, t):
        return _fill(x, t, self.slope * np.asarray(x, dtype=float))

    def dx(self, x, t):
        return _fill(x, t, self.slope)

    def integral(self, x, t):
        return self.slope * x * t

    @property
    def time_constant(self) -> bool:
        return True

    @property
    def space_constant(self) -> bool:
        return self.slope == 0.0

    def lower_bound(self) -> float:
        return min(0.0, self.slope)


CoefficientSpec = Union[Constant, SinusoidalInT, LinearInX]


def as_coefficient(spec) -> CoefficientSpec:
    if isinstance(spec, (Constant, SinusoidalInT, LinearInX)):
        return spec
    if isinstance(spec, (int, float)):
        return Constant(float(spec))
    raise TypeError(f"cannot interpret {spec!r} as a coefficient")


@dataclass(frozen=True)
class MarketModel:
    """Volatility, interest rate, dividend rate and mesh parameter.

    Plain numbers are accepted for any coefficient and wrapped in
    :class:`Constant`.
    """

    sigma: CoefficientSpec
    r: CoefficientSpec
    d: CoefficientSpec
    p_m: float

    def __post_init__(self):
        object.__setattr__(self, "sigma", as_coefficient(self.sigma))
        object.__setattr__(self, "r", as_coefficient(self.r))
        object.__setattr__(self, "d", as_coefficient(self.d))
        if isinstance(self.sigma, LinearInX) or isinstance(self.r, LinearInX):
            raise TypeError("sigma and r may depend on time only")
        if not self.sigma.lower_bound() > 0.0:
            raise DomainError("sigma must be positive for all t")
        if not self.p_m > 0.0:
            raise DomainError("mesh parameter p_m must be positive")

    @property
    def time_constant(self) -> bool:
        return self.sigma.time_constant and self.r.time_constant and self.d.time_constant


# -- change of variables ---------------------------------------------------


def to_x(S, p_m):
    """Map S >= 0 to x = S/(S+p_m) in [0, 1)."""
    S = np.asarray(S, dtype=float)
    if p_m <= 0:
        raise DomainError("p_m must be positive")
    if np.any(S < 0):
        raise DomainError("S must be nonnegative")
    out = S / (S + p_m)
    return float(out) if out.ndim == 0 else out


def from_x(x, p_m):
    """Inverse of :func:`to_x`: S = p_m x/(1-x)."""
    x = np.asarray(x, dtype=float)
    if p_m <= 0:
        raise DomainError("p_m must be positive")
    if np.any(x < 0) or np.any(x >= 1):
        raise DomainError("x must lie in [0, 1)")
    out = p_m * x / (1.0 - x)
    return float(out) if out.ndim == 0 else out


# -- transformed-equation coefficients -----------------------------------


def _check_unit(x):
    if np.any(np.asarray(x) < 0) or np.any(np.asarray(x) > 1):
        raise DomainError("x must lie in [0, 1]")


def coeff_a(x, t, model: MarketModel):
    _check_unit(x)
    sig = model.sigma(x, t)
    return 0.5 * sig * sig * x * (1.0 - x)


def coeff_b(x, t, model: MarketModel):
    _check_unit(x)
    sig = model.sigma(x, t)
    return model.r(x, t) - model.d(x, t) + sig * sig * (2.0 * x - 1.0)


def coeff_c(x, t, model: MarketModel):
    _check_unit(x)
    sig2 = model.sigma(x, t) ** 2
    r = model.r(x, t)
    d = model.d(x, t)
    return (
        (2.0 - 3.0 * x) * r
        - (6.0 * x * x - 6.0 * x + 1.0) * sig2
        - (1.0 - 3.0 * x) * d
        - x * (1.0 - x) * model.d.dx(x, t)
    )


def nondivergent_operator(x, t, model: MarketModel, w, dw, d2w):
    """Spatial operator of the transformed equation in non-divergent form,
    given values of w, w' and w'' at x."""
    sig2 = model.sigma(x, t) ** 2
    r = model.r(x, t)
    d = model.d(x, t)
    q = x * (1.0 - x)
    return -0.5 * sig2 * q * q * d2w - q * (r - d) * dw + ((1.0 - x) * r + x * d) * w


# -- payoffs -----------------------------------------------------------------


def _heaviside(z, at_zero):
    return np.where(z > 0, 1.0, np.where(z < 0, 0.0, at_zero))


@dataclass(frozen=True)
class Call:
    E: float

    def __post_init__(self):
        if not self.E > 0:
            raise DomainError("strike must be positive")

    def __call__(self, S):
        return np.maximum(np.asarray(S, dtype=float) - self.E, 0.0)

    def transformed(self, x, p_m):
        # (S-E)/(S+p_m) = x - k(1-x) with k = E/p_m: exact at x = 1, and
        # bit-equal to 2x-1 for p_m = E
        k = self.E / p_m
        return np.maximum(x - k * (1.0 - x), 0.0)


@dataclass(frozen=True)
class Put:
    E: float

    def __post_init__(self):
        if not self.E > 0:
            raise DomainError("strike must be positive")

    def __call__(self, S):
        return np.maximum(self.E - np.asarray(S, dtype=float), 0.0)

    def transformed(self, x, p_m):
        k = self.E / p_m
        return np.maximum(k * (1.0 - x) - x, 0.0)


@dataclass(frozen=True)
class CashOrNothing:
    """Unit payout for S > E; the value at S = E is ``at_strike``."""

    E: float
    at_strike: float = 0.5

    def __post_init__(self):
        if not self.E > 0:
            raise DomainError("strike must be positive")

    def __call__(self, S):
        return _heaviside(np.asarray(S, dtype=float) - self.E, self.at_strike)

    def transformed(self, x, p_m):
        xe = self.E / (self.E + p_m)
        return _heaviside(x - xe, self.at_strike) * (1.0 - x) / p_m


@dataclass(frozen=True)
class BullSpread:
    E1: float
    E2: float

    def __post_init__(self):
        if not 0 < self.E1 < self.E2:
            raise DomainError("need 0 < E1 < E2")

    def __call__(self, S):
        S = np.asarray(S, dtype=float)
        return np.maximum(S - self.E1, 0.0) - np.maximum(S - self.E2, 0.0)

    def transformed(self, x, p_m):
        k1, k2 = self.E1 / p_m, self.E2 / p_m
        return np.maximum(x - k1 * (1.0 - x), 0.0) - np.maximum(x - k2 * (1.0 - x), 0.0)


@dataclass(frozen=True)
class Butterfly:
    """+1 on (S1, S2), -1 on (S2, S3), zero elsewhere (breakpoints take 0)."""

    S1: float
    S2: float
    S3: float

    def __post_init__(self):
        if not 0 < self.S1 < self.S2 < self.S3:
            raise DomainError("need 0 < S1 < S2 < S3")

    def __call__(self, S):
        S = np.asarray(S, dtype=float)
        up = (S > self.S1) & (S < self.S2)
        down = (S > self.S2) & (S < self.S3)
        return np.where(up, 1.0, 0.0) - np.where(down, 1.0, 0.0)

    def transformed(self, x, p_m):
        x1, x2, x3 = (s / (s + p_m) for s in (self.S1, self.S2, self.S3))
        up = (x > x1) & (x < x2)
        down = (x > x2) & (x < x3)
        return (np.where(up, 1.0, 0.0) - np.where(down, 1.0, 0.0)) * (1.0 - x) / p_m


Payoff = Union[Call, Put, CashOrNothing, BullSpread, Butterfly]



def initial_condition(payoff: Payoff, model: MarketModel, x):
    """Transformed payoff u0(x) = V(S(x))/(S(x) + p_m).

    Each payoff is written directly in x, so x = 1 yields the limit as
    S -> inf (1 for a call, 0 for the bounded payoffs).
    """
    x = np.asarray(x, dtype=float)
    _check_unit(x)
    u = payoff.transformed(x, model.p_m)
    return float(u) if np.ndim(u) == 0 else u


def boundary_decay(model: MarketModel, end: int, t, u0):
    """Exact solution of the degenerate boundary ODEs.

    At x = 0 the equation reduces to u_t = -r(t) u, at x = 1 to
    u_t = -d(1, t) u.  ``end`` is 0 or 1.
    """
    if end == 0:
        return u0 * np.exp(-model.r.integral(0.0, t))
    if end == 1:
        return u0 * np.exp(-model.d.integral(1.0, t))
    raise DomainError("end must be 0 or 1")


def effective_dividend(model: MarketModel) -> float:
    """Constant dividend rate for closed-form pricing; rejects x-dependent d."""
    if not (model.d.space_constant and model.d.time_constant):
        raise DomainError("closed-form pricing needs a constant dividend rate")
    return float(model.d(0.0, 0.0))


__all__ = [
    "DomainError",
    "Constant",
    "SinusoidalInT",
    "LinearInX",
    "CoefficientSpec",
    "MarketModel",
    "to_x",
    "from_x",
    "coeff_a",
    "coeff_b",
    "coeff_c",
    "nondivergent_operator",
    "Call",
    "Put",
    "CashOrNothing",
    "BullSpread",
    "Butterfly",
    "Payoff",
    "initial_condition",
    "boundary_decay",
]
