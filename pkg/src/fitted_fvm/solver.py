"""Time marching of the theta scheme and the M-matrix / positivity diagnostics."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.linalg import lapack

from .assembly import Source, TridiagonalSystem, assemble_step, stiffness
from .flux import interpolate_nodal
from .mesh import ConfigurationError, Mesh
from .model import MarketModel, Payoff, from_x, initial_condition

log = logging.getLogger(__name__)

POSITIVITY_TOL = 1e-12


class SingularSystemError(ArithmeticError):
    def __init__(self, row: int):
        super().__init__(f"zero pivot in tridiagonal elimination at row {row}")
        self.row = row


class SolverError(RuntimeError):
    """A time step failed; carries the step index and a diagnostics snapshot."""

    def __init__(self, step: int, message: str, snapshot: dict):
        super().__init__(f"step {step}: {message}")
        self.step = step
        self.snapshot = snapshot


class PositivityError(SolverError):
    pass


def thomas_solve(sys: TridiagonalSystem) -> np.ndarray:
    """Solve the tridiagonal system (LAPACK gtsv elimination)."""
    if sys.size == 1:
        if sys.diag[0] == 0.0:
            raise SingularSystemError(0)
        return sys.rhs / sys.diag
    *_, x, info = lapack.dgtsv(sys.sub, sys.diag, sys.sup, sys.rhs)
    if info > 0:
        raise SingularSystemError(info - 1)
    if info < 0:
        raise ValueError(f"illegal argument {-info} passed to gtsv")
    return x


# -- M-matrix diagnostic -----------------------------------------------------


@dataclass(frozen=True)
class MMatrixReport:
    passed: bool
    row: Optional[int] = None
    reason: str = ""

    def __bool__(self):
        return self.passed


def m_matrix_check(sys: TridiagonalSystem, check_rhs: bool = True) -> MMatrixReport:
    """Eliminate u_0, u_1 and u_N, u_{N-1} and test the reduced system.

    The reduced matrix on rows 2..N-2 must have positive diagonal,
    nonpositive off-diagonals and be irreducibly diagonally dominant.  With
    ``check_rhs`` the reduced load vector must also be nonnegative, which is
    what the step needs to map nonnegative data to nonnegative data.
    """
    A = np.concatenate(([0.0], sys.sub))  # A[i] multiplies u_{i-1}
    B = sys.diag.copy()
    C = np.concatenate((sys.sup, [0.0]))  # C[i] multiplies u_{i+1}
    F = sys.rhs.copy()
    N = B.size - 1
    if N < 4:
        return MMatrixReport(False, None, "need at least 5 unknowns")

    def fail(row, why):
        return MMatrixReport(False, row, why)

    if not B[0] > 0:
        return fail(0, "B_0 <= 0")
    delta = B[1] - A[1] * C[0] / B[0]
    delta_1 = F[1] - A[1] * F[0] / B[0]
    if not delta > 0:
        return fail(1, "pivot after eliminating u_0 is not positive")
    if not B[N] > 0:
        return fail(N, "B_N <= 0")
    delta_r = B[N - 1] - C[N - 1] * A[N] / B[N]
    delta_r1 = F[N - 1] - C[N - 1] * F[N] / B[N]
    if not delta_r > 0:
        return fail(N - 1, "pivot after eliminating u_N is not positive")

    Bt = B[2 : N - 1].copy()
    Ft = F[2 : N - 1].copy()
    Bt[0] -= A[2] * C[1] / delta
    Ft[0] -= A[2] * delta_1 / delta
    Bt[-1] -= C[N - 2] * A[N - 1] / delta_r
    Ft[-1] -= C[N - 2] * delta_r1 / delta_r
    At = A[2 : N - 1].copy()
    Ct = C[2 : N - 1].copy()
    At[0] = 0.0
    Ct[-1] = 0.0
    rows = np.arange(2, N - 1)

    bad = np.flatnonzero(~(Bt > 0))
    if bad.size:
        return fail(int(rows[bad[0]]), "reduced diagonal entry is not positive")
    bad = np.flatnonzero((At > 0) | (Ct > 0))
    if bad.size:
        return fail(int(rows[bad[0]]), "reduced off-diagonal entry is positive")
    margin = Bt - np.abs(At) - np.abs(Ct)
    bad = np.flatnonzero(margin < 0)
    if bad.size:
        return fail(int(rows[bad[0]]), "reduced row is not diagonally dominant")
    # each irreducible block needs one strictly dominant row
    cuts = np.flatnonzero((Ct[:-1] == 0) | (At[1:] == 0)) + 1
    for block in np.split(np.arange(Bt.size), cuts):
        if not np.any(margin[block] > 0):
            return fail(int(rows[block[0]]), "irreducible block without a strictly dominant row")
    if check_rhs:
        tol = 1e-12 * max(1.0, float(np.max(np.abs(F))))
        bad = np.flatnonzero(Ft < -tol)
        if bad.size:
            return fail(int(rows[bad[0]]), "reduced right-hand side is negative")
    return MMatrixReport(True)


# -- time marching -----------------------------------------------------------


@dataclass(frozen=True)
class SolverConfig:
    """theta-scheme settings.  ``dt`` is a uniform step (rounded so that an
    integer number of equal steps reaches T) or an explicit schedule."""

    T: float = 1.0
    dt: Union[float, Sequence[float]] = 1e-3
    theta: float = 0.5
    record_every: Optional[int] = None
    check_positivity: bool = False
    check_m_matrix: bool = False
    strict: bool = False

    def __post_init__(self):
        if not 0.0 <= self.theta <= 1.0:
            raise ConfigurationError("theta must lie in [0, 1]")
        if not self.T > 0:
            raise ConfigurationError("horizon T must be positive")
        if self.record_every is not None and self.record_every < 1:
            raise ConfigurationError("record_every must be a positive integer")
        self.schedule()

    def schedule(self) -> np.ndarray:
        if np.ndim(self.dt) == 0:
            dt = float(self.dt)
            if not dt > 0:
                raise ConfigurationError("dt must be positive")
            n = max(1, int(np.ceil(self.T / dt - 1e-9)))
            return np.full(n, self.T / n)
        steps = np.asarray(self.dt, dtype=float)
        if steps.ndim != 1 or steps.size == 0 or np.any(steps <= 0):
            raise ConfigurationError("dt schedule must be a nonempty list of positive steps")
        if abs(steps.sum() - self.T) > 1e-12 * max(1.0, self.T):
            raise ConfigurationError("dt schedule must sum to T")
        return steps


@dataclass
class Diagnostics:
    steps: int = 0
    min_value: float = np.inf
    first_negative_step: Optional[int] = None
    m_matrix_checked: int = 0
    m_matrix_failures: int = 0
    first_m_matrix_failure: Optional[tuple] = None  # (step, MMatrixReport)

    @property
    def positive(self) -> bool:
        return self.first_negative_step is None

    @property
    def m_matrix_ok(self) -> bool:
        return self.m_matrix_failures == 0


@dataclass(frozen=True)
class Solution:
    mesh: Mesh
    model: MarketModel
    times: np.ndarray
    values: np.ndarray  # (slice, node)
    diagnostics: Diagnostics = field(default_factory=Diagnostics)

    @property
    def final(self) -> np.ndarray:
        return self.values[-1]

    def slice_index(self, t: float) -> int:
        hit = np.flatnonzero(np.isclose(self.times, t, rtol=0.0, atol=1e-12))
        if not hit.size:
            raise LookupError(f"time {t} is not a recorded slice")
        return int(hit[0])

    def prices(self, k: int = -1):
        """(S, V) at slice k; the x = 1 node is dropped (S = inf)."""
        x = self.mesh.nodes[:-1]
        S = from_x(x, self.model.p_m)
        return S, (S + self.model.p_m) * self.values[k, :-1]


StepBuilder = Callable[[np.ndarray, float, float], TridiagonalSystem]


def march(
    config: SolverConfig,
    mesh: Mesh,
    model: MarketModel,
    u0: np.ndarray,
    build: StepBuilder,
    check_positivity: Optional[bool] = None,
) -> Solution:
    """Generic loop: ``build(u_m, t_m, dt)`` returns the system for u_{m+1}."""
    check_pos = config.check_positivity if check_positivity is None else check_positivity
    dts = config.schedule()
    times = np.concatenate(([0.0], np.cumsum(dts)))
    times[-1] = config.T
    u = np.array(u0, dtype=float)
    if u.shape != mesh.nodes.shape or not np.all(np.isfinite(u)):
        raise ConfigurationError("initial vector must be finite with one value per node")

    diag = Diagnostics(min_value=float(u.min()))
    rec_times, rec_vals = [0.0], [u.copy()]
    stride = config.record_every
    for m, dt in enumerate(dts):
        sys = build(u, times[m], dt)
        if config.check_m_matrix:
            rep = m_matrix_check(sys)
            diag.m_matrix_checked += 1
            if not rep:
                diag.m_matrix_failures += 1
                if diag.first_m_matrix_failure is None:
                    diag.first_m_matrix_failure = (m, rep)
                    log.warning("M-matrix check failed at step %d, row %s: %s", m, rep.row, rep.reason)
                if config.strict:
                    raise SolverError(m, f"M-matrix check failed: {rep.reason}", _snapshot(m, times, u, diag))
        try:
            u = thomas_solve(sys)
        except SingularSystemError as exc:
            raise SolverError(m, str(exc), _snapshot(m, times, u, diag)) from exc
        if not np.all(np.isfinite(u)):
            raise SolverError(m, "non-finite values", _snapshot(m, times, u, diag))
        diag.steps = m + 1
        umin = float(u.min())
        diag.min_value = min(diag.min_value, umin)
        if check_pos and umin < -POSITIVITY_TOL and diag.first_negative_step is None:
            diag.first_negative_step = m + 1
            log.warning("negative value %.3e after step %d", umin, m + 1)
            if config.strict:
                raise PositivityError(m, f"min value {umin:.3e} < 0", _snapshot(m, times, u, diag))
        last = m == len(dts) - 1
        if last or (stride is not None and (m + 1) % stride == 0):
            rec_times.append(times[m + 1])
            rec_vals.append(u.copy())
    return Solution(mesh, model, np.array(rec_times), np.array(rec_vals), diag)


def _snapshot(m, times, u, diag):
    return {"step": m, "t": float(times[m]), "min_value": float(np.min(u)), "diagnostics": diag}


def solve_evolution(
    config: SolverConfig,
    mesh: Mesh,
    model: MarketModel,
    initial: Union[Payoff, np.ndarray],
    source: Optional[Source] = None,
) -> Solution:
    """March the fitted finite-volume theta scheme from the initial data."""
    if isinstance(initial, np.ndarray) or isinstance(initial, (list, tuple)):
        u0 = np.asarray(initial, dtype=float)
    else:
        u0 = initial_condition(initial, model, mesh.nodes)
    bands = stiffness(0.0, mesh, model) if model.time_constant else None

    def build(u, t, dt):
        return assemble_step(u, t, dt, mesh, model, config.theta, source, bands=bands)

    return march(config, mesh, model, u0, build)


def max_stable_dt(
    mesh: Mesh,
    model: MarketModel,
    u,
    theta: float = 0.5,
    t: float = 0.0,
    dt_lo: float = 1e-8,
    dt_hi: float = 10.0,
    iters: int = 60,
) -> float:
    """Largest dt (bisection in log dt) for which :func:`m_matrix_check`
    passes on the step assembled from ``u`` at time ``t``."""

    def ok(dt):
        return m_matrix_check(assemble_step(u, t, dt, mesh, model, theta)).passed

    if ok(dt_hi):
        return dt_hi
    if not ok(dt_lo):
        return 0.0
    lo, hi = np.log(dt_lo), np.log(dt_hi)
    for _ in range(iters):
        midp = 0.5 * (lo + hi)
        if ok(np.exp(midp)):
            lo = midp
        else:
            hi = midp
    return float(np.exp(lo))


def interpolate(solution: Solution, t: float, x):
    """Fitted-basis interpolant of the slice recorded at time t."""
    k = solution.slice_index(t)
    return interpolate_nodal(solution.values[k], x, t, solution.mesh, solution.model)
