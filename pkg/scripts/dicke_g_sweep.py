"""Per-site collective fluctuations <S_a^2>/N of the Dicke chain versus g/gamma.

    python scripts/dicke_g_sweep.py [configs/dicke_g.yaml]
"""
import argparse
import logging

from steadymps.analysis import RunConfig, run_sweep

ap = argparse.ArgumentParser()
ap.add_argument("config", nargs="?", default="configs/dicke_g.yaml")
ap.add_argument("--workers", type=int, default=1)
args = ap.parse_args()
logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

res = run_sweep(RunConfig.load(args.config, workers=args.workers))
for r in res.rows:
    vals = " ".join(f"{k}={r[k]:.4f}" if isinstance(r[k], float) else f"{k}={r[k]}"
                    for k in ("sx2", "sy2", "sz2"))
    print(f"N={r['N']:>3} g={r['g']:<5} {r['status']:<12} D={r['D_final']!s:<3} {vals}")
print(f"csv: {res.csv_path}")
