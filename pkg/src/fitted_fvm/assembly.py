"""Assembly of the theta-weighted tridiagonal system for one time step.

Integrating the divergent form over control volume i and inserting the face
flux linearizations gives the semi-discrete balance

    l_i du_i/dt - q_{i+1/2} rho_{i+1/2} + q_{i-1/2} rho_{i-1/2} + c_i l_i u_i = 0,

with q = x(1-x) at the face.  Writing the spatial part as K(t) u, one step of
the theta scheme from t_m to t_m + dt reads

    (M/dt + theta K) u^{m+1} = (M/dt - (1-theta) K) u^m + M f,

where M = diag(l_i) is the lumped mass and K is sampled at t_m + theta dt.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .flux import face_data
from .mesh import ConfigurationError, Mesh
from .model import MarketModel, coeff_c, nondivergent_operator

Source = Callable[[np.ndarray, float], np.ndarray]


@dataclass(frozen=True)
class TridiagonalSystem:
    """A_i u_{i-1} + B_i u_i + C_i u_{i+1} = F_i, i = 0..N.

    ``sub`` holds A_1..A_N, ``diag`` B_0..B_N, ``sup`` C_0..C_{N-1}.
    """

    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray
    rhs: np.ndarray

    @property
    def size(self) -> int:
        return self.diag.size

    def matvec(self, u):
        u = np.asarray(u, dtype=float)
        out = self.diag * u
        out[1:] += self.sub * u[:-1]
        out[:-1] += self.sup * u[1:]
        return out

    def residual(self, u):
        return self.matvec(u) - self.rhs

    def to_dense(self):
        return np.diag(self.diag) + np.diag(self.sub, -1) + np.diag(self.sup, 1)


@dataclass(frozen=True)
class StiffnessRow:
    lo: Optional[float]
    mid: float
    hi: Optional[float]


def stiffness(t: float, mesh: Mesh, model: MarketModel):
    """Bands (lo, mid, hi) of K(t), each of length N+1.

    ``lo[0]`` and ``hi[N]`` are zero placeholders.
    """
    fd = face_data(t, mesh, model)
    xm = mesh.midpoints
    q = xm * (1.0 - xm)
    n = mesh.N + 1
    lo = np.zeros(n)
    mid = np.zeros(n)
    hi = np.zeros(n)
    # face j contributes -q*rho to row j and +q*rho to row j+1
    mid[:-1] -= q * fd.lo
    hi[:-1] -= q * fd.hi
    lo[1:] += q * fd.lo
    mid[1:] += q * fd.hi
    mid += coeff_c(mesh.nodes, t, model) * mesh.volumes
    return lo, mid, hi


def stiffness_row(i: int, t: float, mesh: Mesh, model: MarketModel) -> StiffnessRow:
    if not 0 <= i <= mesh.N:
        raise IndexError(f"row {i} out of range 0..{mesh.N}")
    lo, mid, hi = stiffness(t, mesh, model)
    return StiffnessRow(
        lo=None if i == 0 else float(lo[i]),
        mid=float(mid[i]),
        hi=None if i == mesh.N else float(hi[i]),
    )


def _check_step(theta, dt):
    if not 0.0 <= theta <= 1.0:
        raise ConfigurationError(f"theta must lie in [0, 1], got {theta}")
    if not dt > 0.0:
        raise ConfigurationError(f"time step must be positive, got {dt}")


def assemble_step(
    u_prev,
    t_m: float,
    dt: float,
    mesh: Mesh,
    model: MarketModel,
    theta: float = 0.5,
    source: Optional[Source] = None,
    bands=None,
) -> TridiagonalSystem:
    """System for u^{m+1} given u^m = ``u_prev`` at time ``t_m``.

    Coefficients (and the source) are sampled at t_m + theta*dt.  ``bands``
    may pass a precomputed ``stiffness`` result for time-independent models.
    """
    _check_step(theta, dt)
    u = np.asarray(u_prev, dtype=float)
    t_theta = t_m + theta * dt
    lo, mid, hi = bands if bands is not None else stiffness(t_theta, mesh, model)
    mass = mesh.volumes / dt

    diag = mass + theta * mid
    sub = theta * lo[1:]
    sup = theta * hi[:-1]

    expl = 1.0 - theta
    rhs = (mass - expl * mid) * u
    rhs[1:] -= expl * lo[1:] * u[:-1]
    rhs[:-1] -= expl * hi[:-1] * u[1:]
    if source is not None:
        rhs += mesh.volumes * source(mesh.nodes, t_theta)
    return TridiagonalSystem(sub=sub, diag=diag, sup=sup, rhs=rhs)


# -- manufactured solutions ------------------------------------------------


@dataclass(frozen=True)
class ManufacturedSolution:
    """An exact solution with analytic derivatives; default exp(x - t)."""

    u: Callable = lambda x, t: np.exp(x - t)
    u_t: Callable = lambda x, t: -np.exp(x - t)
    u_x: Callable = lambda x, t: np.exp(x - t)
    u_xx: Callable = lambda x, t: np.exp(x - t)

    def forcing(self, model: MarketModel) -> Source:
        """f such that u solves u_t + (spatial operator) u = f."""

        def f(x, t):
            return self.u_t(x, t) + nondivergent_operator(
                x, t, model, self.u(x, t), self.u_x(x, t), self.u_xx(x, t)
            )

        return f


EXP_X_MINUS_T = ManufacturedSolution()


def mms_source(exact: ManufacturedSolution, t: float, mesh: Mesh, model: MarketModel) -> np.ndarray:
    return exact.forcing(model)(mesh.nodes, t)
