"""Sweep the detuning of the dissipative Ising chain and print purity and Mz^2.

    python scripts/ising_delta_sweep.py [configs/ising_delta.yaml] [--workers 2]
"""
import argparse
import logging

from steadymps.analysis import RunConfig, run_sweep


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("config", nargs="?", default="configs/ising_delta.yaml")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--output", default=None)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    over = {"workers": args.workers} | ({"output": args.output} if args.output else {})
    res = run_sweep(RunConfig.load(args.config, **over))
    print(f"{'N':>4} {'Delta':>7} {'status':>12} {'D':>3} {'eigenvalue':>10} {'purity':>9} {'Mz^2':>9}")
    for r in res.rows:
        print(f"{r['N']:>4} {r['Delta']:>7} {r['status']:>12} {r['D_final']!s:>3} "
              f"{_num(r['eigenvalue']):>10} {_num(r['purity']):>9} {_num(r['mz2_staggered']):>9}")
    print(f"csv: {res.csv_path}")


def _num(v):
    return f"{v:.3g}" if isinstance(v, float) else str(v)


if __name__ == "__main__":
    main()
