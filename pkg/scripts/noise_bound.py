"""Noisy recovery against the stability bound.

Runs configs/noise_levels.json (or the config given) and prints, per noise
level, the worst ratio of the observed error to the bound.
"""
import sys
from pathlib import Path

from structcs.experiments import emit, load_config, run

ROOT = Path(__file__).resolve().parents[1]

cfg = load_config(sys.argv[1] if len(sys.argv) > 1 else ROOT / "configs" / "noise_levels.json")
table = run(cfg)
out = ROOT / "results" / "noise_levels.csv"
out.parent.mkdir(parents=True, exist_ok=True)
emit(table, out)

worst = {}
for r in table.records():
    if r["status"] != "ok":
        continue
    ratio = r["lhs"] / r["rhs"]
    key = r["noise"]
    worst[key] = max(worst.get(key, 0.0), ratio)
for level, ratio in sorted(worst.items()):
    print(f"noise {level:g}: max error / bound = {ratio:.3f}")
print(f"violations: {table.violations}; wrote {out}")
