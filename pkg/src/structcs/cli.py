"""Command-line entry point.

Exit codes: 0 success, 1 usage or config error, 2 invariant violation
(a bound check failed or a decode request did not converge).
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .decoders import decode_convex, decode_ideal_small
from .experiments import _decoder_opts, _sub, emit, load_config, render, run
from .jsonspec import SpecDoc, SpecError
from .measurements import operator_from_spec
from .models import BudgetExceeded, LevelsModel
from .regularizers import regularizer_from_spec

EXIT_OK, EXIT_USAGE, EXIT_VIOLATION = 0, 1, 2

SUBCOMMANDS = {
    "phase": "phase",
    "noise": "noise",
    "rip": "rip-scaling",
    "boxdim": "boxdim",
    "delta-sigma": "delta-sigma",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _u64(text: str) -> int:
    try:
        v = int(text, 10)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be in [0, 2^64)")
    return v


def _threads(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("threads must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="structcs", description="Structured-sparsity recovery experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in list(SUBCOMMANDS) + ["decode"]:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, type=Path,
                       help="experiment config (decode: request) JSON file")
        p.add_argument("--seed", type=_u64, help="override master_seed")
        p.add_argument("--out", type=Path, help="output path (default: stdout, extras not written)")
        p.add_argument("--format", choices=("csv", "json"), default=None)
        p.add_argument("--threads", type=_threads, default=1)
    return parser


def _run_experiment(args, experiment: str) -> int:
    cfg = load_config(args.config)
    if cfg.experiment != experiment:
        raise UsageError(f"config describes a {cfg.experiment!r} experiment, not {experiment!r}")
    if args.seed is not None:
        cfg.master_seed = args.seed
    fmt = args.format or "csv"
    table = run(cfg, threads=args.threads)
    if args.out is None:
        sys.stdout.write(render(table, fmt))
    else:
        emit(table, args.out, fmt)
    if table.violations:
        print(f"{table.violations} invariant violation(s)", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


_REQUEST_KEYS = {"model", "model_file", "operator", "y", "epsilon", "regularizer", "opts", "decoder"}


def decode_request(doc: SpecDoc, base_dir: Path | None = None) -> dict:
    """Solve one decode request; returns the response object."""
    v = doc.value
    if not isinstance(v, dict):
        raise doc.error((), "request must be an object")
    for key in v:
        if key not in _REQUEST_KEYS:
            raise doc.error((key,), f"unknown key {key!r}")
    if "model" in v:
        model = LevelsModel.from_dict(v["model"], _sub(doc, "model"))
    elif "model_file" in v:
        p = Path(v["model_file"])
        model = LevelsModel.load(p if p.is_absolute() or base_dir is None else base_dir / p)
    else:
        raise doc.error((), "request needs 'model' or 'model_file'")
    if "operator" not in v:
        raise doc.error((), "request needs 'operator'")
    A = operator_from_spec(v["operator"], model.ambient_dim, doc, ("operator",), base_dir)
    y = v.get("y")
    if not isinstance(y, list) or len(y) != A.m or not all(
            isinstance(t, (int, float)) and not isinstance(t, bool) for t in y):
        raise doc.error(("y",), f"y must be an array of {A.m} numbers")
    eps = v.get("epsilon", 0.0)
    if not isinstance(eps, (int, float)) or isinstance(eps, bool) or eps < 0:
        raise doc.error(("epsilon",), "epsilon must be a nonnegative number")
    decoder = v.get("decoder", "convex")
    if decoder not in ("convex", "ideal"):
        raise doc.error(("decoder",), "decoder must be 'convex' or 'ideal'")
    y = np.asarray(y, dtype=float)
    if decoder == "ideal":
        res = decode_ideal_small(A, y, float(eps), model)
    else:
        f = regularizer_from_spec(v.get("regularizer", {"kind": "group-levels", "weights": "adapted"}), model,
                                  doc, ("regularizer",))
        opts = _decoder_opts(v.get("opts", {}), doc, ("opts",))
        res = decode_convex(A, y, float(eps), f, opts)
    out = res.to_dict()
    out["operator"] = {k: val for k, val in A.to_dict().items() if k != "matrix"}
    out["seeds"] = {"operator": A.seed}
    return out


def _finite(obj):
    if isinstance(obj, float) and not np.isfinite(obj):
        return repr(obj)
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_finite(v) for v in obj]
    return obj


def _run_decode(args) -> int:
    if args.format == "csv":
        raise UsageError("decode writes JSON only")
    doc = SpecDoc.from_path(args.config)
    out = decode_request(doc, args.config.parent)
    text = json.dumps(_finite(out), indent=1, allow_nan=False, default=str) + "\n"
    if args.out is None:
        sys.stdout.write(text)
    else:
        args.out.write_text(text)
    return EXIT_OK if out["converged"] else EXIT_VIOLATION


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "decode":
            return _run_decode(args)
        return _run_experiment(args, SUBCOMMANDS[args.command])
    except (SpecError, UsageError, BudgetExceeded, ValueError, OSError) as exc:
        print(f"structcs: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
