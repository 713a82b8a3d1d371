"""Largest dt for which the first step matrix passes the M-matrix check.

The check is only sufficient for positivity.  Near x = 0 and x = 1 the
fitted fluxes are O(1) while the lumped mass is O(h), so the threshold
shrinks roughly like h^2 on uniform meshes.
"""

import argparse

from fitted_fvm.experiments import test_problem
from fitted_fvm.mesh import uniform
from fitted_fvm.model import initial_condition
from fitted_fvm.solver import max_stable_dt


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--tp", type=int, nargs="+", default=[1, 2, 3, 4])
    ap.add_argument("--N", type=int, nargs="+", default=[40, 80, 160, 320, 640])
    ap.add_argument("--theta", type=float, default=0.5)
    args = ap.parse_args()
    print("tp,N,dt_max")
    for tp in args.tp:
        prob = test_problem(tp)
        for N in args.N:
            mesh = uniform(N)
            u0 = abs(initial_condition(prob.payoff, prob.model, mesh.nodes))
            print(f"{tp},{N},{max_stable_dt(mesh, prob.model, u0, theta=args.theta):.4e}")


if __name__ == "__main__":
    main()
