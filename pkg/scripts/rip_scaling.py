"""Smallest m with median RIP constant below delta0 and delta0/2.

Theory predicts m ~ delta^-2, so halving the target should roughly
quadruple m.
"""
import sys
from pathlib import Path

from structcs.experiments import emit, load_config, run

ROOT = Path(__file__).resolve().parents[1]

cfg = load_config(sys.argv[1] if len(sys.argv) > 1 else ROOT / "configs" / "rip_scaling.json")
table = run(cfg)
out = ROOT / "results" / "rip_scaling.csv"
out.parent.mkdir(parents=True, exist_ok=True)
emit(table, out)

for r in table.records():
    print(f"k={r['k']:>3} m={r['m']:>5} median delta={r['median_delta']:.3f}")
mstar = {}
for r in table.extras["mstar"].records():
    mstar.setdefault(r["k"], []).append((r["delta0"], r["m_star"]))
for k, rows in mstar.items():
    (d0, m0), (d1, m1) = sorted(rows, reverse=True)[:2]
    ratio = m1 / m0 if m0 and m1 else float("nan")
    print(f"k={k}: m*({d0:.3f})={m0}, m*({d1:.3f})={m1}, ratio {ratio:.2f}")
