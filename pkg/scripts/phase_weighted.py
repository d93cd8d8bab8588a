"""Weighted vs unit-weight group norms in levels: success rate against m.

    python scripts/phase_weighted.py [--trials 50] [--out results/phase.csv]
"""
import argparse
import math
from pathlib import Path

from structcs.experiments import emit, load_config, run

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--config", type=Path, default=ROOT / "configs" / "phase_weighted_levels.json")
    ap.add_argument("--trials", type=int, help="override trials per cell")
    ap.add_argument("--out", type=Path, default=ROOT / "results" / "phase_weighted.csv")
    args = ap.parse_args()

    cfg = load_config(args.config)
    if args.trials:
        cfg.trials = args.trials
    table = run(cfg)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    emit(table, args.out)

    by = {}
    for r in table.records():
        by.setdefault(r["m"], {})[r["regularizer"]] = r
    print(f"{'m':>4}  " + "  ".join(f"{name:>26}" for name in next(iter(by.values()))))
    for m, regs in by.items():
        cells = [f"{r['success_rate']:.3f} +- {2 * r['stderr']:.3f} ({r['nonconverged']} nc)" for r in regs.values()]
        print(f"{m:>4}  " + "  ".join(f"{c:>26}" for c in cells))
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
