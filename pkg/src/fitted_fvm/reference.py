"""Closed-form Black-Scholes quotes and the centered-difference Crank-Nicolson
baseline (CSDS) used for scheme comparisons."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .assembly import TridiagonalSystem
from .mesh import Mesh
from .model import DomainError, MarketModel, Payoff, initial_condition
from .solver import Solution, SolverConfig, march


@dataclass(frozen=True)
class AnalyticQuote:
    price: np.ndarray | float
    delta: np.ndarray | float


def bs_price_delta(S, E, r, d, sigma, tau, kind="call") -> AnalyticQuote:
    """Dividend-adjusted Black-Scholes price and delta of a European option.

    Vectorized in ``S``.  Phi is ``scipy.special.ndtr`` (double precision).
    """
    S = np.asarray(S, dtype=float)
    if np.any(S <= 0) or E <= 0 or sigma <= 0 or tau <= 0:
        raise DomainError("S, E, sigma and tau must be positive")
    if kind not in ("call", "put"):
        raise ValueError(f"unknown option kind {kind!r}")
    vol = sigma * np.sqrt(tau)
    d1 = (np.log(S / E) + (r - d + 0.5 * sigma * sigma) * tau) / vol
    d2 = d1 - vol
    disc_d = np.exp(-d * tau)
    disc_r = np.exp(-r * tau)
    if kind == "call":
        price = S * disc_d * ndtr(d1) - E * disc_r * ndtr(d2)
        delta = disc_d * ndtr(d1)
    else:
        price = E * disc_r * ndtr(-d2) - S * disc_d * ndtr(-d1)
        delta = -disc_d * ndtr(-d1)
    if price.ndim == 0:
        return AnalyticQuote(float(price), float(delta))
    return AnalyticQuote(price, delta)


# -- centered space differences ------------------------------------------


def _csds_operator(t, mesh: Mesh, model: MarketModel):
    """Bands of L with u_t = L u, L u = 1/2 s^2 q^2 u'' + q (r-d) u' - ((1-x) r + x d) u,
    using three-point nonuniform centered differences; rows 0 and N keep only
    the reaction term (the degenerate boundary ODEs)."""
    x = mesh.nodes
    h = mesh.steps
    n = x.size
    sig2 = model.sigma(x, t) ** 2
    r = model.r(x, t)
    d = model.d(x, t)
    q = x * (1.0 - x)
    diff = 0.5 * sig2 * q * q
    conv = q * (r - d)
    react = (1.0 - x) * r + x * d

    lo = np.zeros(n)
    mid = -react.copy()
    hi = np.zeros(n)
    hm, hp = h[:-1], h[1:]  # h_{i-1}, h_i for interior i
    s = hm + hp
    i = slice(1, n - 1)
    lo[i] = diff[i] * 2.0 / (hm * s) - conv[i] * hp / (hm * s)
    hi[i] = diff[i] * 2.0 / (hp * s) + conv[i] * hm / (hp * s)
    mid[i] += -diff[i] * 2.0 / (hm * hp) + conv[i] * (hp - hm) / (hm * hp)
    return lo, mid, hi


def csds_solve(config: SolverConfig, mesh: Mesh, model: MarketModel, payoff: Payoff | np.ndarray) -> Solution:
    """theta-weighted (Crank-Nicolson for theta = 1/2) centered scheme on the
    non-divergent equation.  Positivity is recorded but never enforced."""
    if isinstance(payoff, np.ndarray):
        u0 = payoff
    else:
        u0 = initial_condition(payoff, model, mesh.nodes)
    theta = config.theta

    def build(u, t, dt):
        lo, mid, hi = _csds_operator(t + theta * dt, mesh, model)
        diag = 1.0 / dt - theta * mid
        rhs = (1.0 / dt + (1.0 - theta) * mid) * u
        rhs[1:] += (1.0 - theta) * lo[1:] * u[:-1]
        rhs[:-1] += (1.0 - theta) * hi[:-1] * u[1:]
        return TridiagonalSystem(sub=-theta * lo[1:], diag=diag, sup=-theta * hi[:-1], rhs=rhs)

    cfg = SolverConfig(T=config.T, dt=config.dt, theta=theta, record_every=config.record_every)
    return march(cfg, mesh, model, u0, build, check_positivity=True)


def discrete_delta(solution: Solution, k: int = -1) -> np.ndarray:
    """dV/dS at the nodes of slice k.

    With V = (S + P_m) u and dx/dS = (1-x)^2/P_m the chain rule collapses to
    dV/dS = u + (1 - x) u_x, finite up to and including x = 1.  u_x uses
    centered differences inside and one-sided differences at the ends.
    """
    x = solution.mesh.nodes
    u = solution.values[k]
    ux = np.gradient(u, x)
    return u + (1.0 - x) * ux


def sign_changes(v, tol: float = 1e-10) -> int:
    """Number of sign changes in the successive differences of v.

    Differences with magnitude at most ``tol * max|v|`` count as zero and are
    skipped.
    """
    v = np.asarray(v, dtype=float)
    dv = np.diff(v)
    scale = max(float(np.max(np.abs(v))), 1e-300)
    s = np.sign(dv[np.abs(dv) > tol * scale])
    return int(np.count_nonzero(s[1:] != s[:-1]))
