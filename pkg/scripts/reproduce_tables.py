"""Regenerate the four convergence tables as CSV files.

    python3 scripts/reproduce_tables.py --out results/
    python3 scripts/reproduce_tables.py --only 1 2   # the quick ones
"""

import argparse
import time
from pathlib import Path

from fitted_fvm.experiments import run_analytic_convergence, run_mms_study, run_self_convergence

STUDIES = {
    "1": [
        ("table1_tp1", lambda: run_mms_study(1, "uniform", [80, 160, 320, 640], dt=1e-3, T=1.0)),
        ("table1_tp3", lambda: run_mms_study(3, "uniform", [80, 160, 320, 640], dt=1e-3, T=1.0)),
    ],
    "2": [
        ("table2_tp1", lambda: run_mms_study(1, "graded", [20, 40, 80, 160], dt="min_h", T=0.1, p=2.0)),
        ("table2_tp3", lambda: run_mms_study(3, "graded", [20, 40, 80, 160], dt="min_h", T=0.1, p=2.0)),
    ],
    "3": [
        ("table3_tp2", lambda: run_self_convergence(2, [80, 160, 320, 640, 1280])),
        ("table3_tp3", lambda: run_self_convergence(3, [80, 160, 320, 640, 1280])),
    ],
    "4": [("table4", lambda: run_analytic_convergence([80, 160, 320, 640, 1280], dt=1e-4))],
}


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", default="results", type=Path)
    ap.add_argument("--only", nargs="+", choices=sorted(STUDIES), default=sorted(STUDIES))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    for key in args.only:
        for name, run in STUDIES[key]:
            start = time.perf_counter()
            table = run()
            (args.out / f"{name}.csv").write_text(table.to_csv())
            if table.e_point is not None:
                (args.out / f"{name}_pointwise.csv").write_text(table.pointwise_csv())
            print(f"== {name} ({time.perf_counter() - start:.1f}s)")
            print(table)


if __name__ == "__main__":
    main()
