"""Exact L^+L gap of the Dicke chain near g=0, where the steady state becomes degenerate.

    python scripts/gap_table.py --N 3,4 --g 0,0.05,0.1,0.25,0.5,1,2
"""
import argparse

from steadymps.analysis import gap_table

ap = argparse.ArgumentParser()
ap.add_argument("--model", default="dicke")
ap.add_argument("--N", default="3,4")
ap.add_argument("--g", default="0,0.02,0.05,0.1,0.25,0.5,1,2")
args = ap.parse_args()

rows = gap_table(args.model, {"g": [float(x) for x in args.g.split(",")], "gamma": [1.0]},
                 [int(n) for n in args.N.split(",")])
print(f"{'N':>3} {'g':>6} {'gap':>12} {'null dim':>8}")
for r in rows:
    print(f"{r['N']:>3} {r['g']:>6} {r['gap']:>12.4e} {r['null_dim']:>8}")
