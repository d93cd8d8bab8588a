"""Experiment runner: phase diagrams, noise sweeps, RIP scaling, box-counting, δ_Σ.

Every trial is seeded by ``derive_seed(master_seed, cell, trial)`` so a
table does not depend on scheduling or on the worker count, and any single
trial can be replayed from the seed in its row.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from .decoders import DecodeOptions, decode_convex
from .delta import delta_sigma_empirical
from .jsonspec import SpecDoc, SpecError
from .measurements import RANDOM_KINDS, MeasureOp, explicit, normalize_columns, random_matrix, rip_exact, rip_sampled
from .models import LevelsModel, sample_model
from .regularizers import Regularizer, delta0_levels, dist_f, regularizer_from_spec, stability_constants
from .secants import FixedVectors, ModelSecants, UnitSphere, estimate_boxdim

EXPERIMENTS = ("phase", "noise", "rip-scaling", "boxdim", "delta-sigma")
BOXDIM_SOURCES = ("model-secants", "circle", "sphere", "point")


def derive_seed(*parts: int) -> int:
    """Stable 64-bit seed from nonnegative integers (blake2b, little endian)."""
    h = hashlib.blake2b(digest_size=8)
    for p in parts:
        p = int(p)
        if not 0 <= p < 2**64:
            raise ValueError("seed parts must be in [0, 2^64)")
        h.update(p.to_bytes(8, "little"))
    return int.from_bytes(h.digest(), "little")


# -- configuration ---------------------------------------------------------------


@dataclass
class ExperimentConfig:
    experiment: str
    model: LevelsModel | None = None
    operator: dict = field(default_factory=lambda: {"kind": "dense-gaussian"})
    regularizers: list = field(default_factory=lambda: [{"kind": "group-levels", "weights": "adapted"}])
    m_grid: list = field(default_factory=list)
    k_grid: list | None = None
    trials: int = 20
    master_seed: int = 0
    tau: float = 1e-4
    epsilon: float = 0.0
    noise_levels: list = field(default_factory=lambda: [0.0])
    eps_factor: float = 1.0
    model_error: float = 0.0
    bound_slack: float = 1e-6
    decoder: DecodeOptions = field(default_factory=DecodeOptions)
    rip_method: str = "exact"
    rip_samples: int = 2000
    delta0: list | None = None
    source: dict = field(default_factory=lambda: {"kind": "model-secants"})
    alpha_grid: list = field(default_factory=list)
    samples: int = 2000
    r2_min: float = 0.98
    fit_range: tuple | None = None
    candidate_budget: int = 10_000

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"experiment must be one of {', '.join(EXPERIMENTS)}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if self.experiment in ("phase", "noise", "rip-scaling") and not self.m_grid:
            raise ValueError("m_grid must be nonempty")
        if self.experiment == "boxdim" and not self.alpha_grid:
            raise ValueError("alpha_grid must be nonempty")
        if self.experiment != "boxdim" or self.source.get("kind") == "model-secants":
            if self.model is None:
                raise ValueError("a model is required")

    def models(self) -> list[LevelsModel]:
        """One model per sparsity cell (the config model if no k_grid)."""
        if self.k_grid is None:
            return [self.model]
        return [self.model.with_sparsities(k) for k in self.k_grid]


_CONFIG_KEYS = {
    "experiment", "model", "model_file", "operator", "regularizers", "regularizer", "m_grid", "k_grid",
    "trials", "master_seed", "tau", "epsilon", "noise_levels", "eps_factor", "model_error", "bound_slack",
    "decoder", "rip_method", "rip_samples", "delta0", "source", "alpha_grid", "samples", "r2_min",
    "fit_range", "candidate_budget",
}


def _num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def config_from_doc(doc: SpecDoc, base_dir: Path | None = None) -> ExperimentConfig:
    """Validate a parsed config; errors carry the source line of the bad member."""
    v = doc.value
    if not isinstance(v, dict):
        raise doc.error((), "config must be a JSON object")
    for key in v:
        if key not in _CONFIG_KEYS:
            raise doc.error((key,), f"unknown key {key!r}")
    kw: dict[str, Any] = {}
    exp = v.get("experiment")
    if exp not in EXPERIMENTS:
        raise doc.error(("experiment",), f"experiment must be one of {', '.join(EXPERIMENTS)}")
    kw["experiment"] = exp

    if "model" in v and "model_file" in v:
        raise doc.error(("model_file",), "give either model or model_file, not both")
    if "model" in v:
        kw["model"] = LevelsModel.from_dict(v["model"], _sub(doc, "model"))
    elif "model_file" in v:
        p = Path(v["model_file"])
        if base_dir is not None and not p.is_absolute():
            p = base_dir / p
        if not p.is_file():
            raise doc.error(("model_file",), f"model file {str(p)!r} not found")
        kw["model"] = LevelsModel.load(p)

    def ints(key, lo=0):
        val = v[key]
        if not isinstance(val, list) or not all(_int(x) and x >= lo for x in val):
            raise doc.error((key,), f"{key} must be an array of integers >= {lo}")
        return list(val)

    def pos_int(key, lo=1):
        if not _int(v[key]) or v[key] < lo:
            raise doc.error((key,), f"{key} must be an integer >= {lo}")
        return v[key]

    def nonneg(key, strict=False):
        val = v[key]
        if not _num(val) or val < 0 or (strict and val == 0):
            raise doc.error((key,), f"{key} must be a {'positive' if strict else 'nonnegative'} number")
        return float(val)

    if "m_grid" in v:
        kw["m_grid"] = ints("m_grid")
        if not kw["m_grid"]:
            raise doc.error(("m_grid",), "m_grid must be nonempty")
    if "k_grid" in v:
        kg = v["k_grid"]
        if not isinstance(kg, list) or not kg or not all(
                isinstance(k, list) and all(_int(x) and x >= 0 for x in k) for k in kg):
            raise doc.error(("k_grid",), "k_grid must be a nonempty array of per-level sparsity arrays")
        kw["k_grid"] = [tuple(k) for k in kg]
    for key in ("trials", "rip_samples", "samples", "candidate_budget"):
        if key in v:
            kw[key] = pos_int(key)
    if "master_seed" in v:
        kw["master_seed"] = pos_int("master_seed", 0)
    for key in ("tau",):
        if key in v:
            kw[key] = nonneg(key, strict=True)
    for key in ("epsilon", "model_error", "bound_slack"):
        if key in v:
            kw[key] = nonneg(key)
    if "eps_factor" in v:
        kw["eps_factor"] = nonneg("eps_factor")
        if kw["eps_factor"] < 1:
            raise doc.error(("eps_factor",), "eps_factor must be >= 1 so that ||e|| <= epsilon")
    if "r2_min" in v:
        kw["r2_min"] = nonneg("r2_min")
    for key in ("noise_levels", "alpha_grid", "delta0"):
        if key in v:
            val = v[key]
            if not isinstance(val, list) or not val or not all(_num(x) and x >= 0 for x in val):
                raise doc.error((key,), f"{key} must be a nonempty array of nonnegative numbers")
            kw[key] = [float(x) for x in val]
    if "fit_range" in v:
        fr = v["fit_range"]
        if not isinstance(fr, list) or len(fr) != 2 or not all(_num(x) and x > 0 for x in fr) or fr[0] > fr[1]:
            raise doc.error(("fit_range",), "fit_range must be [lo, hi] with 0 < lo <= hi")
        kw["fit_range"] = (float(fr[0]), float(fr[1]))
    if "rip_method" in v:
        if v["rip_method"] not in ("exact", "sampled"):
            raise doc.error(("rip_method",), "rip_method must be 'exact' or 'sampled'")
        kw["rip_method"] = v["rip_method"]

    if "operator" in v:
        kw["operator"] = _check_operator(v["operator"], doc)
    if "regularizer" in v and "regularizers" in v:
        raise doc.error(("regularizer",), "give either regularizer or regularizers, not both")
    regs = [v["regularizer"]] if "regularizer" in v else v.get("regularizers")
    if regs is not None:
        key = "regularizer" if "regularizer" in v else "regularizers"
        if not isinstance(regs, list) or not regs:
            raise doc.error((key,), "regularizers must be a nonempty array")
        model = kw.get("model")
        for i, spec in enumerate(regs):
            path = (key,) if key == "regularizer" else (key, i)
            if model is not None:
                regularizer_from_spec(spec, model, doc, path)  # validation only
        kw["regularizers"] = list(regs)
    if "decoder" in v:
        kw["decoder"] = _decoder_opts(v["decoder"], doc, ("decoder",))
    if "source" in v:
        src = v["source"]
        if not isinstance(src, dict) or src.get("kind") not in BOXDIM_SOURCES:
            raise doc.error(("source",), f"source.kind must be one of {', '.join(BOXDIM_SOURCES)}")
        for key in src:
            if key not in ("kind", "dim"):
                raise doc.error(("source", key), f"unknown key {key!r}")
        if "dim" in src and (not _int(src["dim"]) or src["dim"] < 1):
            raise doc.error(("source", "dim"), "dim must be a positive integer")
        kw["source"] = dict(src)
    try:
        cfg = ExperimentConfig(**kw)
        if cfg.k_grid is not None:
            cfg.models()
    except ValueError as exc:
        raise doc.error((), str(exc)) from None
    return cfg


def _sub(doc: SpecDoc, key: str) -> SpecDoc:
    lines = {p[1:]: ln for p, ln in doc.lines.items() if p[:1] == (key,)}
    return SpecDoc(doc.value[key], lines, doc.source)


def _check_operator(op, doc: SpecDoc) -> dict:
    if not isinstance(op, dict):
        raise doc.error(("operator",), "operator must be an object")
    kinds = RANDOM_KINDS + ("identity",)
    for key in op:
        if key not in ("kind", "normalize_columns"):
            raise doc.error(("operator", key), f"unknown key {key!r} (m and seeds come from the grid)")
    if op.get("kind") not in kinds:
        raise doc.error(("operator", "kind"), f"kind must be one of {', '.join(kinds)}")
    if not isinstance(op.get("normalize_columns", False), bool):
        raise doc.error(("operator", "normalize_columns"), "normalize_columns must be true or false")
    return dict(op)


def _decoder_opts(spec, doc: SpecDoc, path: tuple) -> DecodeOptions:
    if not isinstance(spec, dict):
        raise doc.error(path, "decoder options must be an object")
    kw = {}
    for key, val in spec.items():
        if key in ("tol", "feas_tol", "power_tol"):
            if not _num(val) or val <= 0:
                raise doc.error(path + (key,), f"{key} must be a positive number")
            kw[key] = float(val)
        elif key in ("max_iter", "check_every"):
            if not _int(val) or val < 1:
                raise doc.error(path + (key,), f"{key} must be a positive integer")
            kw[key] = val
        elif key in ("adaptive", "whiten"):
            if not isinstance(val, bool):
                raise doc.error(path + (key,), f"{key} must be true or false")
            kw[key] = val
        else:
            raise doc.error(path + (key,), f"unknown key {key!r}")
    return DecodeOptions(**kw)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    doc = SpecDoc.from_path(path)
    return config_from_doc(doc, path.parent)


# -- tables ----------------------------------------------------------------------


@dataclass
class ResultTable:
    columns: tuple
    rows: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)
    violations: int = 0

    def add(self, *row):
        if len(row) != len(self.columns):
            raise ValueError(f"row has {len(row)} values for {len(self.columns)} columns")
        self.rows.append(tuple(row))

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]

    def records(self) -> list[dict]:
        return [dict(zip(self.columns, r)) for r in self.rows]


def _csv_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def _json_cell(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    return v


def render(table: ResultTable, fmt: str = "csv") -> str:
    """Text form of a table; floats keep 17 significant digits."""
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(table.columns)
        for row in table.rows:
            w.writerow([_csv_cell(v) for v in row])
        return buf.getvalue()
    if fmt == "json":
        rows = [{c: _json_cell(v) for c, v in zip(table.columns, row)} for row in table.rows]
        return json.dumps({"columns": list(table.columns), "rows": rows}, indent=1, allow_nan=False) + "\n"
    raise ValueError("format must be csv or json")


def emit(table: ResultTable, path, fmt: str = "csv") -> list[Path]:
    """Write ``table`` (and its extras as ``<stem>.<name><suffix>``); returns the paths."""
    path = Path(path)
    written = [path]
    path.write_text(render(table, fmt))
    for name, extra in table.extras.items():
        p = path.with_name(f"{path.stem}.{name}{path.suffix}")
        p.write_text(render(extra, fmt))
        written.append(p)
    return written


# -- helpers -------------------------------------------------------------------


def _map(fn: Callable, tasks: Sequence, threads: int) -> list:
    if threads <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (8 * threads))))


def build_operator(spec: dict, m: int, n: int, rng: np.random.Generator) -> MeasureOp:
    kind = spec["kind"]
    if kind == "identity":
        if m != n:
            raise ValueError("the identity operator needs m = n")
        return explicit(np.eye(n))
    A = MeasureOp(kind, random_matrix(kind, m, n, rng))
    return normalize_columns(A) if spec.get("normalize_columns", False) else A


def _k_label(model: LevelsModel) -> str:
    return ";".join(str(k) for k in model.sparsities)


def _stderr(p: float, n: int) -> float:
    return math.sqrt(p * (1 - p) / n)


def _unit(rng: np.random.Generator, n: int, mask: np.ndarray | None = None) -> np.ndarray:
    for _ in range(100):
        u = rng.standard_normal(n)
        if mask is not None:
            u = np.where(mask, u, 0.0)
        nu = np.linalg.norm(u)
        if nu > 0:
            return u / nu
    raise RuntimeError("no nonzero direction available")


def _stats(values: list) -> tuple[float, float]:
    if not values:
        return math.nan, math.nan
    a = np.asarray(values, dtype=float)
    return float(a.mean()), float(a.std(ddof=1)) if len(a) > 1 else 0.0


# -- phase -----------------------------------------------------------------------


def _phase_trial(task):
    model, op, regs, m, eps, tau, opts, seed = task
    rng = np.random.default_rng(seed)
    n = model.ambient_dim
    x = sample_model(model, rng)
    A = build_operator(op, m, n, rng)
    y = A.apply(x)
    nx = float(np.linalg.norm(x))
    out = []
    for f in regs:
        r = decode_convex(A, y, eps, f, opts)
        err = float(np.linalg.norm(r.x_star - x))
        rel = err / nx if nx > 0 else err
        out.append((r.converged and err <= tau * nx, r.converged, rel, r.iterations))
    return out


def run_phase(cfg: ExperimentConfig, threads: int = 1) -> ResultTable:
    """Success rates over (k, m) cells, one row per regularizer.

    All regularizers see the same planted vectors and operators (paired trials).
    Success means converged and ``||x* - x|| <= tau ||x||``.
    """
    table = ResultTable(("k", "m", "regularizer", "trials", "successes", "success_rate", "stderr",
                         "nonconverged", "mean_rel_error", "stdev_rel_error", "mean_iterations", "cell_seed"))
    trials_table = ResultTable(("k", "m", "regularizer", "trial", "seed", "success", "converged",
                                "rel_error", "iterations"))
    cells = [(model, m) for model in cfg.models() for m in cfg.m_grid]
    tasks = []
    reg_sets = []
    for c, (model, m) in enumerate(cells):
        regs = [regularizer_from_spec(s, model) for s in cfg.regularizers]
        reg_sets.append(regs)
        for t in range(cfg.trials):
            tasks.append((model, cfg.operator, regs, m, cfg.epsilon, cfg.tau, cfg.decoder,
                          derive_seed(cfg.master_seed, c, t)))
    results = _map(_phase_trial, tasks, threads)
    for c, (model, m) in enumerate(cells):
        chunk = results[c * cfg.trials:(c + 1) * cfg.trials]
        for i, f in enumerate(reg_sets[c]):
            res = [r[i] for r in chunk]
            succ = sum(1 for r in res if r[0])
            rate = succ / cfg.trials
            mean_err, sd_err = _stats([r[2] for r in res])
            table.add(_k_label(model), m, f.label(), cfg.trials, succ, rate, _stderr(rate, cfg.trials),
                      sum(1 for r in res if not r[1]), mean_err, sd_err,
                      float(np.mean([r[3] for r in res])), derive_seed(cfg.master_seed, c))
            for t, r in enumerate(res):
                trials_table.add(_k_label(model), m, f.label(), t, derive_seed(cfg.master_seed, c, t),
                                 bool(r[0]), bool(r[1]), r[2], r[3])
    table.extras["trials"] = trials_table
    return table


# -- noise -----------------------------------------------------------------------


def _is_adapted(f: Regularizer) -> bool:
    if f.kind != "group-levels":
        return f.kind == "l1" and f.model.singleton_groups and f.model.n_levels == 1
    want = Regularizer.adapted(f.model).weights
    return all(math.isclose(a, b, rel_tol=1e-12) for a, b in zip(f.weights, want))


def _noise_trial(task):
    model, op, f, m, level, eps_factor, model_error, slack, opts, seed = task
    rng = np.random.default_rng(seed)
    n = model.ambient_dim
    A = build_operator(op, m, n, rng)
    delta = rip_exact(A, model).delta_hat
    J = model.n_levels
    if delta >= delta0_levels(J):
        return (delta, "skipped-delta", None, None, None, None, None, None)
    consts = stability_constants(J, model.sparsities, delta)
    x = sample_model(model, rng)
    if model_error > 0:
        x = x + model_error * max(float(np.linalg.norm(x)), 1.0) * _unit(rng, n, model.covered)
    d = dist_f(x, model, f)
    e = level * _unit(rng, m) if m else np.zeros(0)
    ne = float(np.linalg.norm(e))
    eps = eps_factor * ne
    r = decode_convex(A, A.apply(x) + e, eps, f, opts)
    lhs = float(np.linalg.norm(r.x_star - x))
    rhs = consts.C_sigma * (ne + eps) + consts.D_sigma * d
    violation = lhs > rhs + slack * max(float(np.linalg.norm(x)), 1.0)
    return (delta, "ok", r.converged, ne, eps, lhs, rhs, violation)


def run_noise(cfg: ExperimentConfig, threads: int = 1) -> ResultTable:
    """Per-trial check of ``||x* - x|| <= C (||e|| + eps) + D d_f(x)``.

    The constants use the exact RIP constant of each drawn operator; draws
    with ``delta >= delta0`` are recorded with status ``skipped-delta``. A
    violation needs ``lhs > rhs + bound_slack * max(||x||, 1)``, the slack
    absorbing the decoder's stopping tolerance.
    """
    table = ResultTable(("k", "m", "noise", "trial", "seed", "delta", "status", "converged",
                         "noise_norm", "epsilon", "lhs", "rhs", "violation"))
    cells = [(model, m, lv) for model in cfg.models() for m in cfg.m_grid for lv in cfg.noise_levels]
    tasks = []
    for c, (model, m, lv) in enumerate(cells):
        f = regularizer_from_spec(cfg.regularizers[0], model)
        if not _is_adapted(f):
            raise ValueError("the error bound is stated for adapted weights w_j = 1/sqrt(k_j)")
        for t in range(cfg.trials):
            tasks.append((model, cfg.operator, f, m, lv, cfg.eps_factor, cfg.model_error, cfg.bound_slack,
                          cfg.decoder, derive_seed(cfg.master_seed, c, t)))
    results = _map(_noise_trial, tasks, threads)
    summary = ResultTable(("k", "m", "noise", "trials", "checked", "skipped", "nonconverged", "violations",
                           "max_ratio"))
    for c, (model, m, lv) in enumerate(cells):
        chunk = results[c * cfg.trials:(c + 1) * cfg.trials]
        for t, r in enumerate(chunk):
            table.add(_k_label(model), m, lv, t, derive_seed(cfg.master_seed, c, t), *r)
        ok = [r for r in chunk if r[1] == "ok"]
        ratios = [r[5] / r[6] for r in ok if r[6] > 0]
        nviol = sum(1 for r in ok if r[7])
        table.violations += nviol
        summary.add(_k_label(model), m, lv, cfg.trials, len(ok), cfg.trials - len(ok),
                    sum(1 for r in ok if not r[2]), nviol, max(ratios) if ratios else math.nan)
    table.extras["summary"] = summary
    return table


# -- RIP scaling -----------------------------------------------------------------


def _rip_trial(task):
    model, op, m, method, samples, seed = task
    rng = np.random.default_rng(seed)
    A = build_operator(op, m, model.ambient_dim, rng)
    if method == "exact":
        return rip_exact(A, model).delta_hat
    return rip_sampled(A, ModelSecants(model), samples, seed=rng).delta_hat


def run_rip_scaling(cfg: ExperimentConfig, threads: int = 1) -> ResultTable:
    """Median RIP constant per (k, m) and the smallest ``m`` reaching each target."""
    table = ResultTable(("k", "m", "method", "trials", "median_delta", "mean_delta", "stdev_delta", "cell_seed"))
    models = cfg.models()
    cells = [(model, m) for model in models for m in cfg.m_grid]
    tasks = [(model, cfg.operator, m, cfg.rip_method, cfg.rip_samples, derive_seed(cfg.master_seed, c, t))
             for c, (model, m) in enumerate(cells) for t in range(cfg.trials)]
    results = _map(_rip_trial, tasks, threads)
    medians: dict[tuple, float] = {}
    for c, (model, m) in enumerate(cells):
        vals = results[c * cfg.trials:(c + 1) * cfg.trials]
        med = float(np.median(vals))
        medians[(c // len(cfg.m_grid), m)] = med
        mean, sd = _stats(vals)
        table.add(_k_label(model), m, cfg.rip_method, cfg.trials, med, mean, sd, derive_seed(cfg.master_seed, c))
    mstar = ResultTable(("k", "delta0", "m_star"))
    for i, model in enumerate(models):
        targets = cfg.delta0 or [delta0_levels(model.n_levels)]
        for d0 in targets:
            hits = [m for m in sorted(cfg.m_grid) if medians[(i, m)] <= d0]
            mstar.add(_k_label(model), d0, hits[0] if hits else None)
    table.extras["mstar"] = mstar
    return table


# -- box-counting ---------------------------------------------------------------


def _boxdim_sampler(cfg: ExperimentConfig):
    src = cfg.source
    kind = src["kind"]
    if kind == "model-secants":
        return ModelSecants(cfg.model)
    if kind == "circle":
        return UnitSphere(2)
    dim = src.get("dim", 2)
    if kind == "sphere":
        return UnitSphere(dim)
    e = np.zeros((1, dim))
    e[0, 0] = 1.0
    return FixedVectors(e)


def run_boxdim(cfg: ExperimentConfig, threads: int = 1) -> ResultTable:
    """Greedy cover counts over the radius grid plus the fitted slope."""
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        est = estimate_boxdim(_boxdim_sampler(cfg), cfg.alpha_grid, cfg.samples, seed=cfg.master_seed,
                              r2_min=cfg.r2_min, fit_range=cfg.fit_range)
    table = ResultTable(("alpha", "count", "in_fit"))
    fit = set(int(i) for i in est.fit_indices)
    for i, (a, n) in enumerate(zip(est.alphas, est.counts)):
        table.add(float(a), int(n), i in fit)
    summary = ResultTable(("slope", "intercept", "alpha_S", "r2", "status", "samples", "seed"))
    summary.add(est.slope, est.intercept, est.alpha_S, est.r2, est.status, cfg.samples, cfg.master_seed)
    table.extras["summary"] = summary
    return table


# -- δ_Σ -------------------------------------------------------------------------


def run_delta_sigma(cfg: ExperimentConfig, threads: int = 1) -> ResultTable:
    """Per-sample heuristic and sup estimates of δ_Σ(f) with the closed-form bound."""
    f = regularizer_from_spec(cfg.regularizers[0], cfg.model)
    rep = delta_sigma_empirical(f, cfg.model, cfg.trials, seed=cfg.master_seed,
                                candidate_budget=cfg.candidate_budget)
    table = ResultTable(("trial", "heuristic", "sup_estimate", "lower_bound", "violation"))
    bad = {v["trial"] for v in rep.violations}
    for t, (h, s) in enumerate(zip(rep.heuristic_values, rep.sup_estimates)):
        table.add(t, h, s, rep.lower_bound, t in bad)
    table.violations = len(rep.violations)
    summary = ResultTable(("regularizer", "lower_bound", "empirical_min", "heuristic_min", "trials", "seed",
                           "undefined", "violations"))
    summary.add(f.label(), rep.lower_bound, rep.empirical_min, rep.heuristic_min, rep.trials,
                cfg.master_seed, rep.undefined, len(rep.violations))
    table.extras["summary"] = summary
    return table


RUNNERS = {
    "phase": run_phase,
    "noise": run_noise,
    "rip-scaling": run_rip_scaling,
    "boxdim": run_boxdim,
    "delta-sigma": run_delta_sigma,
}


def run(cfg: ExperimentConfig, threads: int = 1) -> ResultTable:
    return RUNNERS[cfg.experiment](cfg, threads)


__all__ = [
    "ExperimentConfig", "ResultTable", "SpecError", "config_from_doc", "derive_seed", "emit", "load_config",
    "render", "run", "run_boxdim", "run_delta_sigma", "run_noise", "run_phase", "run_rip_scaling",
]
