"""Test problems, error norms, and the convergence and comparison studies."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .assembly import EXP_X_MINUS_T
from .mesh import ConfigurationError, Mesh, power_graded, uniform
from .model import (
    Butterfly,
    Call,
    CashOrNothing,
    DomainError,
    LinearInX,
    MarketModel,
    Payoff,
    SinusoidalInT,
    from_x,
    initial_condition,
)
from .reference import bs_price_delta, csds_solve, discrete_delta, sign_changes
from .solver import Solution, SolverConfig, solve_evolution


@dataclass(frozen=True)
class TestProblem:
    id: int
    model: MarketModel
    payoff: Payoff
    T: float = 1.0
    S_max: float = 700.0

    __test__ = False  # not a pytest class


def test_problem(tp: int) -> TestProblem:
    """The four benchmark problems.

    TP3/TP4 use r = 0.1 + 0.02 sin(10 T t) with T = 1 and
    d = 0.06 S/(S + P_m) = 0.06 x.
    """
    T = 1.0
    if tp == 1:
        return TestProblem(1, MarketModel(sigma=0.3, r=0.1, d=0.04, p_m=400.0), Call(400.0), T, 700.0)
    if tp == 2:
        return TestProblem(2, MarketModel(sigma=0.4, r=0.1, d=0.04, p_m=400.0), CashOrNothing(400.0), T, 700.0)
    r_t = SinusoidalInT(0.1, 0.02, 10.0 * T)
    if tp == 3:
        return TestProblem(3, MarketModel(sigma=0.4, r=r_t, d=LinearInX(0.06), p_m=400.0), Call(400.0), T, 700.0)
    if tp == 4:
        return TestProblem(
            4, MarketModel(sigma=0.4, r=r_t, d=LinearInX(0.06), p_m=50.0), Butterfly(40.0, 50.0, 60.0), T, 100.0
        )
    raise ConfigurationError(f"unknown test problem {tp}")


test_problem.__test__ = False


# -- norms -------------------------------------------------------------------


def _diff(u_h, u_ref):
    u_h = np.asarray(u_h, dtype=float)
    u_ref = np.asarray(u_ref, dtype=float)
    if u_h.shape != u_ref.shape:
        raise ValueError(f"length mismatch: {u_h.shape} vs {u_ref.shape}")
    return u_h - u_ref


def norm_c(u_h, u_ref) -> float:
    e = _diff(u_h, u_ref)
    return float(np.max(np.abs(e))) if e.size else 0.0


def norm_l2(u_h, u_ref, mesh: Mesh | np.ndarray) -> float:
    """sqrt(sum_i l_i e_i^2); ``mesh`` may also be the volume vector itself."""
    e = _diff(u_h, u_ref)
    l = mesh.volumes if isinstance(mesh, Mesh) else np.asarray(mesh, dtype=float)
    if l.shape != e.shape:
        raise ValueError("length mismatch between error and control volumes")
    return float(np.sqrt(np.sum(l * e * e)))


def rate_of_convergence(e_n: float, e_2n: float) -> float:
    """Double-mesh estimate log2(E^N / E^{2N})."""
    if not (e_n > 0 and e_2n > 0):
        raise DomainError("errors must be positive")
    return math.log2(e_n / e_2n)


def _rates(errors):
    out = [None]
    for a, b in zip(errors[:-1], errors[1:]):
        out.append(rate_of_convergence(a, b) if a > 0 and b > 0 else None)
    return out


# -- convergence tables ----------------------------------------------------


def _fmt(v) -> str:
    return "" if v is None else format(float(v), ".10g")


@dataclass
class ConvergenceTable:
    Ns: list
    e_inf: list
    e_l2: list
    metadata: dict = field(default_factory=dict)
    e_point: Optional[list] = None  # pointwise series (analytic study)

    HEADER = "N,E_inf,RC_inf,E_l2,RC_l2"

    @property
    def rc_inf(self):
        return _rates(self.e_inf)

    @property
    def rc_l2(self):
        return _rates(self.e_l2)

    @property
    def rc_point(self):
        return _rates(self.e_point) if self.e_point is not None else None

    def rows(self):
        return list(zip(self.Ns, self.e_inf, self.rc_inf, self.e_l2, self.rc_l2))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(self.HEADER + "\n")
        for row in self.rows():
            buf.write(",".join([str(row[0])] + [_fmt(v) for v in row[1:]]) + "\n")
        return buf.getvalue()

    def pointwise_csv(self) -> str:
        if self.e_point is None:
            return ""
        lines = ["N,E_point,RC_point"]
        lines += [f"{n},{_fmt(e)},{_fmt(rc)}" for n, e, rc in zip(self.Ns, self.e_point, self.rc_point)]
        return "\n".join(lines) + "\n"

    def __str__(self):
        lines = [f"{'N':>6} {'E_inf':>11} {'RC':>6} {'E_l2':>11} {'RC':>6}"]
        for n, ei, ri, e2, r2 in self.rows():
            rc = lambda v: "   -  " if v is None else f"{v:6.3f}"  # noqa: E731
            lines.append(f"{n:6d} {ei:11.4e} {rc(ri)} {e2:11.4e} {rc(r2)}")
        if self.e_point is not None:
            lines.append("pointwise: " + ", ".join(f"{e:.4e}" for e in self.e_point))
        return "\n".join(lines)


def _check_doubling(Ns):
    Ns = [int(n) for n in Ns]
    if not Ns:
        raise ConfigurationError("need at least one mesh size")
    for a, b in zip(Ns[:-1], Ns[1:]):
        if b != 2 * a:
            raise ConfigurationError(f"mesh sizes must double: got {a} then {b}")
    return Ns


def make_mesh(family: str, N: int, p: float = 2.0) -> Mesh:
    if family == "uniform":
        return uniform(N)
    if family == "graded":
        return power_graded(N, p)
    raise ConfigurationError(f"unknown mesh family {family!r}")


def run_mms_study(
    tp: int,
    family: str = "uniform",
    Ns: Sequence[int] = (80, 160, 320, 640),
    dt: float | str = 1e-3,
    T: float = 1.0,
    p: float = 2.0,
    theta: float = 0.5,
) -> ConvergenceTable:
    """Manufactured solution exp(x - t) with the coefficients of ``tp``.

    ``dt="min_h"`` takes the smallest mesh step as time step.
    """
    if tp not in (1, 3):
        raise ConfigurationError("manufactured-solution studies use TP1 or TP3 coefficients")
    Ns = _check_doubling(Ns)
    model = test_problem(tp).model
    exact = EXP_X_MINUS_T
    f = exact.forcing(model)
    e_inf, e_l2 = [], []
    for N in Ns:
        mesh = make_mesh(family, N, p)
        step = float(mesh.steps.min()) if dt == "min_h" else float(dt)
        sol = solve_evolution(SolverConfig(T=T, dt=step, theta=theta), mesh, model, exact.u(mesh.nodes, 0.0), f)
        ref = exact.u(mesh.nodes, T)
        e_inf.append(norm_c(sol.final, ref))
        e_l2.append(norm_l2(sol.final, ref, mesh))
    meta = {"study": "mms", "problem": tp, "family": family, "p": p, "dt": dt, "T": T, "theta": theta}
    return ConvergenceTable(Ns, e_inf, e_l2, meta)


def run_self_convergence(
    tp: int,
    Ns: Sequence[int] = (80, 160, 320, 640, 1280),
    fine_N: int = 5120,
    fine_dt: float = 1e-4,
    dt: Optional[float] = None,
    theta: float = 0.5,
    reference: Optional[np.ndarray] = None,
) -> ConvergenceTable:
    """Errors against a fine uniform-grid solution restricted to the coarse nodes."""
    Ns = _check_doubling(Ns)
    for N in Ns:
        if fine_N % N:
            raise ConfigurationError(f"N={N} does not divide the fine grid size {fine_N}")
    prob = test_problem(tp)
    if reference is None:
        fine = solve_evolution(SolverConfig(T=prob.T, dt=fine_dt, theta=theta), uniform(fine_N), prob.model, prob.payoff)
        reference = fine.final
    step = fine_dt if dt is None else dt
    e_inf, e_l2 = [], []
    for N in Ns:
        mesh = uniform(N)
        sol = solve_evolution(SolverConfig(T=prob.T, dt=step, theta=theta), mesh, prob.model, prob.payoff)
        ref = reference[:: fine_N // N]
        e_inf.append(norm_c(sol.final, ref))
        e_l2.append(norm_l2(sol.final, ref, mesh))
    meta = {"study": "self", "problem": tp, "fine_N": fine_N, "fine_dt": fine_dt, "dt": step, "theta": theta}
    return ConvergenceTable(Ns, e_inf, e_l2, meta)


def analytic_reference(mesh: Mesh, model: MarketModel, E: float, T: float) -> np.ndarray:
    """Transformed closed-form call price at every node except x_N = 1."""
    x = mesh.nodes[:-1]
    S = from_x(x, model.p_m)
    d = float(model.d(0.0, 0.0))
    ref = np.zeros_like(x)
    pos = S > 0
    ref[pos] = bs_price_delta(S[pos], E, float(model.r(0.0, 0.0)), d, float(model.sigma(0.0, 0.0)), T).price / (
        S[pos] + model.p_m
    )
    return ref


def run_analytic_convergence(
    Ns: Sequence[int] = (80, 160, 320, 640, 1280),
    dt: float = 1e-4,
    S_point: float = 600.0,
    theta: float = 0.5,
) -> ConvergenceTable:
    """TP1 with d = 0 against the closed-form price; x_N is left out of the norms."""
    Ns = _check_doubling(Ns)
    base = test_problem(1)
    model = replace(base.model, d=0.0)
    E = base.payoff.E
    x_point = S_point / (S_point + model.p_m)
    e_inf, e_l2, e_pt = [], [], []
    for N in Ns:
        mesh = uniform(N)
        sol = solve_evolution(SolverConfig(T=base.T, dt=dt, theta=theta), mesh, model, base.payoff)
        ref = analytic_reference(mesh, model, E, base.T)
        u = sol.final[:-1]
        e_inf.append(norm_c(u, ref))
        e_l2.append(norm_l2(u, ref, mesh.volumes[:-1]))
        k = int(np.argmin(np.abs(mesh.nodes[:-1] - x_point)))
        e_pt.append(abs(float(u[k] - ref[k])))
    meta = {"study": "analytic", "problem": 1, "d": 0.0, "dt": dt, "S_point": S_point, "theta": theta}
    return ConvergenceTable(Ns, e_inf, e_l2, meta, e_point=e_pt)


# -- scheme comparison -------------------------------------------------------


@dataclass(frozen=True)
class ComparisonSetup:
    name: str
    model: MarketModel
    payoff: Payoff
    N: int
    T: float
    dt: float
    S_max: float = 700.0


COMPARISON_PRESETS = {
    "oscillation": ComparisonSetup(
        "oscillation", MarketModel(sigma=0.01, r=0.1, d=0.0, p_m=400.0), Call(400.0), N=320, T=1.0, dt=1e-4
    ),
    "signflip-tp2": ComparisonSetup(
        "signflip-tp2",
        MarketModel(sigma=0.1, r=0.0, d=LinearInX(0.4), p_m=400.0),
        CashOrNothing(400.0),
        N=40,
        T=2.0,
        dt=1e-3,
    ),
    "signflip-tp3": ComparisonSetup(
        "signflip-tp3",
        MarketModel(sigma=0.1, r=0.0, d=LinearInX(2.0), p_m=400.0),
        Call(400.0),
        N=40,
        T=2.0,
        dt=1e-3,
    ),
}


@dataclass
class ComparisonReport:
    setup: ComparisonSetup
    fitted: Solution
    csds: Solution
    fitted_delta: np.ndarray
    csds_delta: np.ndarray
    fitted_min: float
    csds_min: float
    fitted_flips: int
    csds_flips: int

    def summary_line(self) -> str:
        return (
            f"fitted_min={self.fitted_min:.6e} csds_min={self.csds_min:.6e} "
            f"fitted_flips={self.fitted_flips} csds_flips={self.csds_flips}"
        )

    def scheme_csv(self, scheme: str) -> str:
        sol, delta = (self.fitted, self.fitted_delta) if scheme == "fitted" else (self.csds, self.csds_delta)
        return solution_csv(sol, [-1], extra={"delta": delta})


def run_comparison(preset: str | ComparisonSetup, schemes=("fitted", "csds")) -> ComparisonReport:
    """Run both schemes on one setup; flips are counted on nodes with S <= S_max."""
    if isinstance(preset, str) and preset not in COMPARISON_PRESETS:
        raise ConfigurationError(f"unknown comparison preset {preset!r}")
    setup = COMPARISON_PRESETS[preset] if isinstance(preset, str) else preset
    mesh = uniform(setup.N)
    cfg = SolverConfig(T=setup.T, dt=setup.dt, check_positivity=True)
    fitted = solve_evolution(cfg, mesh, setup.model, setup.payoff)
    csds = csds_solve(cfg, mesh, setup.model, setup.payoff)
    S = np.append(from_x(mesh.nodes[:-1], setup.model.p_m), np.inf)
    window = S <= setup.S_max
    fd, cd = discrete_delta(fitted), discrete_delta(csds)
    return ComparisonReport(
        setup,
        fitted,
        csds,
        fd,
        cd,
        fitted_min=fitted.diagnostics.min_value,
        csds_min=csds.diagnostics.min_value,
        fitted_flips=sign_changes(fd[window]),
        csds_flips=sign_changes(cd[window]),
    )


# -- positivity ----------------------------------------------------------------


@dataclass(frozen=True)
class PositivityRecord:
    tp: int
    N: int
    dt: float
    part: str  # "full", or "positive"/"negative" for sign-changing data
    min_value: float
    steps: int
    m_matrix_failures: int

    @property
    def passed(self) -> bool:
        return self.min_value >= -1e-12 and self.m_matrix_failures == 0 and self.steps > 0


def positivity_run(tp: int, N: int, dt: float, theta: float = 0.5) -> list:
    """Run ``tp`` with positivity and M-matrix diagnostics on.

    Sign-changing data (the TP4 butterfly) is split into its positive and
    negative parts; by linearity each part must stay nonnegative.
    """
    prob = test_problem(tp)
    mesh = uniform(N)
    u0 = initial_condition(prob.payoff, prob.model, mesh.nodes)
    parts = {"full": u0} if u0.min() >= 0 else {"positive": np.maximum(u0, 0.0), "negative": np.maximum(-u0, 0.0)}
    cfg = SolverConfig(T=prob.T, dt=dt, theta=theta, check_positivity=True, check_m_matrix=True)
    out = []
    for part, data in parts.items():
        sol = solve_evolution(cfg, mesh, prob.model, data)
        dg = sol.diagnostics
        out.append(PositivityRecord(tp, N, dt, part, dg.min_value, dg.steps, dg.m_matrix_failures))
    return out


# -- CSV output ----------------------------------------------------------------


def solution_csv(sol: Solution, slices: Sequence[int], extra: Optional[dict] = None) -> str:
    """Rows ``t,x,S,u,V`` for each requested slice; S and V at x = 1 are
    written as ``inf`` (V is 0 there when u is 0)."""
    extra = extra or {}
    p_m = sol.model.p_m
    x = sol.mesh.nodes
    S = np.append(from_x(x[:-1], p_m), np.inf)
    cols = ["t", "x", "S", "u", "V"] + list(extra)
    buf = io.StringIO()
    buf.write(",".join(cols) + "\n")
    for k in slices:
        u = sol.values[k]
        t = sol.times[k]
        for i in range(x.size):
            if i == x.size - 1:
                s_txt = "inf"
                v_txt = "0" if u[i] == 0 else ("inf" if u[i] > 0 else "-inf")
            else:
                s_txt = _fmt(S[i])
                v_txt = _fmt((S[i] + p_m) * u[i])
            row = [_fmt(t), _fmt(x[i]), s_txt, _fmt(u[i]), v_txt] + [_fmt(extra[c][i]) for c in extra]
            buf.write(",".join(row) + "\n")
    return buf.getvalue()
