"""Run the Delta=0 size series and extrapolate <Mz^2> linearly in 1/N.

    python scripts/extrapolate_order.py [configs/ising_scaling.yaml]
    python scripts/extrapolate_order.py --csv results/sweep_<hash>.csv

Rows whose eigenvalue passes the 1e-5 acceptance level are used even when
the polarization criterion did not settle within the bond schedule.
"""
import argparse
import logging

from steadymps.analysis import RunConfig, extrapolate_csv, run_sweep

ap = argparse.ArgumentParser()
ap.add_argument("config", nargs="?", default="configs/ising_scaling.yaml")
ap.add_argument("--csv", help="reuse an existing sweep CSV instead of solving")
ap.add_argument("--column", default="mz2_staggered")
args = ap.parse_args()
logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

path = args.csv or run_sweep(RunConfig.load(args.config)).csv_path
(a, b, rms), pts = extrapolate_csv(path, args.column, {"Delta": 0.0},
                                   statuses=("converged", "unconverged"), max_eigenvalue=1e-5)
for n, v in pts:
    print(f"N={n:>4}  {args.column}={v:.6f}")
print(f"{args.column}(N) = {a:.3e} + {b:.4f}/N   rms residual {rms:.2e}")
print("intercept consistent with zero" if abs(a) <= 3 * rms else "intercept NOT consistent with zero")
