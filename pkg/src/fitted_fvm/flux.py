"""Fitted approximations of the flux density rho(u) = a u' + b u at the
control-volume faces, and the fitted basis functions.

Every face flux is linear in the two adjacent nodal values, so it is stored
as a pair of coefficients ``(lo, hi)`` with rho ~ lo * u_left + hi * u_right.

Interior faces (1 <= i <= N-2) solve the local two-point problem
(A x(1-x) v' + b v)' = 0 exactly, with A = sigma^2/2 frozen at the face so
that A x(1-x) v' + b v reproduces rho.  With phi(x) = x/(1-x),
delta = ln(phi_{i+1}/phi_i) and z = alpha * delta this gives the
Scharfetter-Gummel-type form

    hi = (a/delta) B(-z),   lo = -(a/delta) B(z),   B(z) = z/(e^z - 1).

The faces next to the degenerate ends use the one-sided upwind
approximations with the free parameter of the right face set to zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import Mesh
from .model import MarketModel, coeff_b

# |alpha * delta| below this uses the series of B instead of z/expm1(z)
SMALL_Z = 1e-6


@dataclass(frozen=True)
class FaceFlux:
    face: int
    coeff_lo: float
    coeff_hi: float
    value: float = float("nan")

    def __call__(self, u_lo, u_hi):
        return self.coeff_lo * u_lo + self.coeff_hi * u_hi


def bernoulli(z):
    """B(z) = z / (e^z - 1), evaluated without cancellation or overflow."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < SMALL_Z
    safe = np.where(small, 1.0, z)
    with np.errstate(over="ignore"):
        big = safe / np.expm1(safe)
    out = np.where(small, 1.0 - 0.5 * z + z * z / 12.0, big)
    return float(out) if out.ndim == 0 else out


def log_phi_gaps(mesh: Mesh) -> np.ndarray:
    """delta_i = ln(phi(x_{i+1}) / phi(x_i)) for interior intervals i = 1..N-2.

    Returned with length N; entries 0 and N-1 (degenerate ends) are NaN.
    """
    x, h = mesh.nodes, mesh.steps
    gaps = np.full(mesh.N, np.nan)
    i = np.arange(1, mesh.N - 1)
    gaps[i] = np.log1p(h[i] / x[i]) + np.log1p(h[i] / (1.0 - x[i + 1]))
    return gaps


@dataclass(frozen=True)
class FaceData:
    """Coefficient samples at the faces at one time level."""

    a: np.ndarray  # sigma^2/2 at interior faces; a-bar / a-double-bar at faces 0 / N-1
    b: np.ndarray
    alpha: np.ndarray
    lo: np.ndarray
    hi: np.ndarray


def face_data(t: float, mesh: Mesh, model: MarketModel, gaps: np.ndarray | None = None) -> FaceData:
    """Flux coefficients for every face at time t."""
    xm = mesh.midpoints
    N = mesh.N
    sig2 = model.sigma(xm, t) ** 2
    b = coeff_b(xm, t, model)

    # the local problem keeps x(1-x) variable, so only sigma^2/2 is frozen
    a = 0.5 * sig2
    a[0] = 0.5 * sig2[0] * (1.0 - xm[0])
    a[N - 1] = 0.5 * sig2[N - 1] * xm[N - 1]
    alpha = b / a

    if gaps is None:
        gaps = log_phi_gaps(mesh)
    lo = np.empty(N)
    hi = np.empty(N)

    inner = slice(1, N - 1)
    z = alpha[inner] * gaps[inner]
    scale = a[inner] / gaps[inner]
    hi[inner] = scale * bernoulli(-z)
    lo[inner] = -scale * bernoulli(z)

    h = mesh.steps
    if alpha[0] >= 0.0:
        g = a[0] * (1.0 + alpha[0]) * xm[0] / h[0]
        lo[0], hi[0] = b[0] - g, g
    else:
        lo[0], hi[0] = b[0], 0.0

    if alpha[N - 1] <= 0.0:
        g = a[N - 1] * (1.0 - alpha[N - 1]) * (1.0 - xm[N - 1]) / h[N - 1]
        lo[N - 1], hi[N - 1] = -g, b[N - 1] + g
    else:
        lo[N - 1], hi[N - 1] = 0.0, b[N - 1]

    return FaceData(a=a, b=b, alpha=alpha, lo=lo, hi=hi)


def alpha(i: int, t: float, mesh: Mesh, model: MarketModel) -> float:
    """alpha_i = b/(sigma^2/2) at face i+1/2 (b/a-bar, b/a-double-bar at the end faces)."""
    _check_face(i, mesh)
    return float(face_data(t, mesh, model).alpha[i])


def _check_face(i, mesh):
    if not 0 <= i <= mesh.N - 1:
        raise IndexError(f"face index {i} out of range 0..{mesh.N - 1}")


def _face_flux(i, u_lo, u_hi, t, mesh, model):
    fd = face_data(t, mesh, model)
    lo, hi = float(fd.lo[i]), float(fd.hi[i])
    return FaceFlux(face=i, coeff_lo=lo, coeff_hi=hi, value=lo * u_lo + hi * u_hi)


def flux_interior(i: int, u_i: float, u_ip1: float, t: float, mesh: Mesh, model: MarketModel) -> FaceFlux:
    if not 1 <= i <= mesh.N - 2:
        raise IndexError(f"interior face index must lie in 1..{mesh.N - 2}, got {i}")
    return _face_flux(i, u_i, u_ip1, t, mesh, model)


def flux_left(u_0: float, u_1: float, t: float, mesh: Mesh, model: MarketModel) -> FaceFlux:
    return _face_flux(0, u_0, u_1, t, mesh, model)


def flux_right(u_nm1: float, u_n: float, t: float, mesh: Mesh, model: MarketModel) -> FaceFlux:
    return _face_flux(mesh.N - 1, u_nm1, u_n, t, mesh, model)


# -- fitted basis -------------------------------------------------------------


def _left_weight(k, x, fd: FaceData, mesh: Mesh):
    """Weight of node k in the local shape on interval [x_k, x_{k+1}]."""
    xs = mesh.nodes
    if k == 0 or k == mesh.N - 1:
        return (xs[k + 1] - x) / (xs[k + 1] - xs[k])
    al = fd.alpha[k]
    L = np.log(x / (1.0 - x))
    L_hi = np.log(xs[k + 1] / (1.0 - xs[k + 1]))
    delta = log_phi_gaps(mesh)[k]
    s = al * (L_hi - L)
    S = al * delta
    if abs(S) < SMALL_Z:
        return (L_hi - L) / delta * (1.0 + 0.5 * (s - S))
    if S > 0:
        return np.exp(s - S) * np.expm1(-s) / np.expm1(-S)
    return np.expm1(s) / np.expm1(S)


def _locate(x, mesh):
    k = np.searchsorted(mesh.nodes, x, side="right") - 1
    return np.clip(k, 0, mesh.N - 1)


def basis_eval(i: int, x, t: float, mesh: Mesh, model: MarketModel):
    """Fitted hat function phi_i at x (exponentially fitted on interior
    intervals, linear on the two end intervals)."""
    if not 0 <= i <= mesh.N:
        raise IndexError(f"node index {i} out of range")
    fd = face_data(t, mesh, model)
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.zeros_like(xa)
    ks = _locate(xa, mesh)
    for j, (xv, k) in enumerate(zip(xa, ks)):
        if k == i:
            out[j] = _left_weight(k, xv, fd, mesh)
        elif k == i - 1:
            out[j] = 1.0 - _left_weight(k, xv, fd, mesh)
    return float(out[0]) if np.ndim(x) == 0 else out


def interpolate_nodal(u, x, t: float, mesh: Mesh, model: MarketModel):
    """Evaluate sum_i u_i phi_i(x)."""
    fd = face_data(t, mesh, model)
    u = np.asarray(u, dtype=float)
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty_like(xa)
    for j, (xv, k) in enumerate(zip(xa, _locate(xa, mesh))):
        w = _left_weight(k, xv, fd, mesh)
        out[j] = w * u[k] + (1.0 - w) * u[k + 1]
    return float(out[0]) if np.ndim(x) == 0 else out
