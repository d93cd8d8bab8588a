"""Random measurement operators, RIP estimation and measurement-count bounds.

Every operator is realized as an explicit ``(m, input_dim)`` matrix. A
*composed* operator ``A = M P_H`` stores the orthonormal basis of ``H`` and
the inner ``M`` acting on coordinates in that basis.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .jsonspec import SpecDoc
from .models import BudgetExceeded, LevelsModel
from .secants import FixedVectors, Sampler, SubspaceBasis

KINDS = ("dense-gaussian", "dense-bernoulli", "sphere-rows", "orthogonal-rows", "composed", "explicit-matrix")
RANDOM_KINDS = ("dense-gaussian", "dense-bernoulli", "sphere-rows", "orthogonal-rows")
DEFAULT_BUDGET = 10**6


def random_matrix(kind: str, m: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """One draw of an isotropic ensemble, ``E ||M x||^2 = ||x||^2``."""
    if kind == "dense-gaussian":
        return rng.standard_normal((m, d)) / math.sqrt(m) if m else np.zeros((0, d))
    if kind == "dense-bernoulli":
        signs = rng.integers(0, 2, size=(m, d)) * 2.0 - 1.0
        return signs / math.sqrt(m) if m else np.zeros((0, d))
    if kind == "sphere-rows":
        # rows uniform on the sphere of radius sqrt(d/m)
        g = rng.standard_normal((m, d))
        if m == 0:
            return g
        return g / np.linalg.norm(g, axis=1, keepdims=True) * math.sqrt(d / m)
    if kind == "orthogonal-rows":
        return _orthogonal_rows(rng.standard_normal((d, m)), m, d)
    raise ValueError(f"unknown random ensemble {kind!r}")


def _orthogonal_rows(g: np.ndarray, m: int, d: int) -> np.ndarray:
    # Haar-distributed orthonormal rows scaled by sqrt(d/m); m = d is orthogonal
    if m > d:
        raise ValueError("orthogonal-rows needs m <= input dimension")
    if m == 0:
        return np.zeros((0, d))
    q, r = np.linalg.qr(g)
    q = q * np.sign(np.diagonal(r, axis1=-2, axis2=-1))[..., None, :]
    return np.swapaxes(q, -1, -2) * math.sqrt(d / m)


def random_matrices(kind: str, m: int, d: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """Stack of ``count`` independent draws, shape ``(count, m, d)``."""
    if kind == "dense-gaussian":
        return rng.standard_normal((count, m, d)) / math.sqrt(m)
    if kind == "dense-bernoulli":
        return (rng.integers(0, 2, size=(count, m, d)) * 2.0 - 1.0) / math.sqrt(m)
    if kind == "sphere-rows":
        g = rng.standard_normal((count, m, d))
        return g / np.linalg.norm(g, axis=2, keepdims=True) * math.sqrt(d / m)
    if kind == "orthogonal-rows":
        return _orthogonal_rows(rng.standard_normal((count, d, m)), m, d)
    raise ValueError(f"unknown random ensemble {kind!r}")


@dataclass(frozen=True, eq=False)
class MeasureOp:
    """A linear map R^input_dim -> R^m with its adjoint."""

    kind: str
    matrix: np.ndarray
    seed: int | None = None
    inner: "MeasureOp | None" = None
    basis: SubspaceBasis | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown operator kind {self.kind!r}")
        mat = np.array(self.matrix, dtype=float)
        if mat.ndim != 2:
            raise ValueError("operator matrix must be 2-D")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    @property
    def m(self) -> int:
        return self.matrix.shape[0]

    @property
    def input_dim(self) -> int:
        return self.matrix.shape[1]

    def apply(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.input_dim:
            raise ValueError(f"expected input dimension {self.input_dim}, got {x.shape[-1]}")
        return x @ self.matrix.T

    def adjoint(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape[-1] != self.m:
            raise ValueError(f"expected measurement dimension {self.m}, got {u.shape[-1]}")
        return u @ self.matrix

    __call__ = apply

    def norm(self) -> float:
        """Spectral norm (exact, via SVD; the matrices here are desk-sized)."""
        if self.matrix.size == 0:
            return 0.0
        return float(np.linalg.norm(self.matrix, 2))

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "m": self.m, "input_dim": self.input_dim}
        if self.seed is not None:
            out["seed"] = self.seed
        if self.kind == "explicit-matrix":
            out["matrix"] = self.matrix.tolist()
        return out


def gaussian(m: int, n: int, seed=None) -> MeasureOp:
    """I.i.d. N(0, 1/m) entries."""
    return MeasureOp("dense-gaussian", random_matrix("dense-gaussian", m, n, np.random.default_rng(seed)), _int_seed(seed))


def bernoulli(m: int, n: int, seed=None) -> MeasureOp:
    """I.i.d. +-1/sqrt(m) entries."""
    return MeasureOp("dense-bernoulli", random_matrix("dense-bernoulli", m, n, np.random.default_rng(seed)), _int_seed(seed))


def sphere_rows(m: int, d: int, seed=None) -> MeasureOp:
    """I.i.d. rows uniform on the sphere of radius sqrt(d/m)."""
    return MeasureOp("sphere-rows", random_matrix("sphere-rows", m, d, np.random.default_rng(seed)), _int_seed(seed))


def random_operator(kind: str, m: int, n: int, seed=None) -> MeasureOp:
    return MeasureOp(kind, random_matrix(kind, m, n, np.random.default_rng(seed)), _int_seed(seed))


def explicit(matrix) -> MeasureOp:
    return MeasureOp("explicit-matrix", np.asarray(matrix, dtype=float))


def normalize_columns(A: MeasureOp) -> MeasureOp:
    """Rescale every nonzero column to unit norm (keeps kind and seed)."""
    norms = np.linalg.norm(A.matrix, axis=0)
    return MeasureOp(A.kind, A.matrix / np.where(norms > 0, norms, 1.0), A.seed)


def compose(M: MeasureOp, H: SubspaceBasis) -> MeasureOp:
    """``A = M P_H`` with ``P_H`` returning coordinates in the basis of ``H``."""
    if M.input_dim != H.dim:
        raise ValueError(f"inner operator takes {M.input_dim} inputs but dim H = {H.dim}")
    return MeasureOp("composed", M.matrix @ H.basis, M.seed, inner=M, basis=H)


def _int_seed(seed):
    return int(seed) if isinstance(seed, (int, np.integer)) else None


def operator_from_spec(spec: dict, n: int, doc: SpecDoc | None = None, path: tuple = (),
                       base_dir: Path | None = None) -> MeasureOp:
    """Build an operator from its JSON spec for inputs of dimension ``n``.

    ``{"kind": ..., "m": .., "seed": .., "compose_with_H": optional path}``;
    explicit matrices use ``"matrix": [[...]]`` or ``"matrix": "identity"``.
    """
    doc = doc or SpecDoc.from_value(spec)
    if not isinstance(spec, dict):
        raise doc.error(path, "operator spec must be an object")
    allowed = {"kind", "m", "seed", "compose_with_H", "matrix", "normalize_columns"}
    for key in spec:
        if key not in allowed:
            raise doc.error(path + (key,), f"unknown key {key!r}")
    kind = spec.get("kind")
    if kind not in KINDS or kind == "composed":
        raise doc.error(path + ("kind",), f"kind must be one of {', '.join(k for k in KINDS if k != 'composed')}")
    if kind == "explicit-matrix":
        mat = spec.get("matrix")
        if mat == "identity":
            return explicit(np.eye(n))
        try:
            arr = np.array(mat, dtype=float)
        except (TypeError, ValueError):
            raise doc.error(path + ("matrix",), "matrix must be a rectangular array of numbers") from None
        if arr.ndim != 2 or arr.shape[1] != n:
            raise doc.error(path + ("matrix",), f"matrix must have {n} columns")
        return explicit(arr)
    m = spec.get("m")
    if not isinstance(m, int) or isinstance(m, bool) or m < 0:
        raise doc.error(path + ("m",), "m must be a nonnegative integer")
    seed = spec.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise doc.error(path + ("seed",), "seed must be a nonnegative integer")
    unit_cols = spec.get("normalize_columns", False)
    if not isinstance(unit_cols, bool):
        raise doc.error(path + ("normalize_columns",), "normalize_columns must be true or false")
    H_path = spec.get("compose_with_H")
    if H_path is None:
        A = random_operator(kind, m, n, seed)
        return normalize_columns(A) if unit_cols else A
    p = Path(H_path)
    if base_dir is not None and not p.is_absolute():
        p = base_dir / p
    try:
        basis = np.atleast_2d(np.array(json.loads(p.read_text())["basis"], dtype=float))
    except (OSError, KeyError, ValueError) as exc:
        raise doc.error(path + ("compose_with_H",), f"cannot read subspace basis: {exc}") from None
    H = SubspaceBasis(basis)
    if H.ambient_dim != n:
        raise doc.error(path + ("compose_with_H",), f"basis vectors must have length {n}")
    return compose(random_operator(kind, m, H.dim, seed), H)


# -- RIP estimation ---------------------------------------------------------------


@dataclass
class RipReport:
    delta_hat: float
    method: str
    samples_or_supports: int
    seed: int | None = None
    budget: int | None = None
    worst_vector: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "delta_hat": float(self.delta_hat),
            "method": self.method,
            "samples_or_supports": int(self.samples_or_supports),
            "seed": self.seed,
            "budget": self.budget,
        }


def rip_sampled(A: MeasureOp, sampler: Sampler, n_trials: int | None = None, seed=0,
                chunk: int = 4096) -> RipReport:
    """``max |‖Az‖² - 1|`` over sampled unit secants; a lower bound on δ.

    With a :class:`FixedVectors` sampler and no ``n_trials``, every stored
    vector is used once.
    """
    if n_trials is None:
        if not isinstance(sampler, FixedVectors):
            raise ValueError("n_trials is required for random samplers")
        n_trials = len(sampler)
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    rng = np.random.default_rng(seed)
    # fixed lists restart on every call, so slice one materialized pass instead
    fixed = np.asarray(sampler(n_trials, rng), dtype=float) if isinstance(sampler, FixedVectors) else None
    worst, worst_vec = -1.0, None
    done = 0
    while done < n_trials:
        batch = min(chunk, n_trials - done)
        Z = fixed[done:done + batch] if fixed is not None else np.asarray(sampler(batch, rng), dtype=float)
        AZ = A.apply(Z)
        dev = np.abs(np.einsum("ij,ij->i", AZ, AZ) - 1.0)
        i = int(np.argmax(dev))
        if dev[i] > worst:
            worst, worst_vec = float(dev[i]), Z[i].copy()
        done += batch
    return RipReport(worst, "sampled", n_trials, _int_seed(seed), worst_vector=worst_vec)


def _secant_supports(model: LevelsModel, budget: int) -> list[np.ndarray]:
    doubled = model.doubled()
    return [doubled.support_coordinates(s) for s in doubled.iter_supports(maximal=True, budget=budget)]


def _restricted_extremes(A: MeasureOp, supports: list[np.ndarray], chunk: int = 20000):
    """Per support: (lambda_min, lambda_max, v_min, v_max) of ``A_S^T A_S``.

    Supports are batched by size; eigenvectors are embedded back into R^n.
    """
    gram = A.matrix.T @ A.matrix
    n = A.input_dim
    lo = np.empty(len(supports))
    hi = np.empty(len(supports))
    vlo = np.zeros((len(supports), n))
    vhi = np.zeros((len(supports), n))
    by_size: dict[int, list[int]] = {}
    for i, s in enumerate(supports):
        by_size.setdefault(len(s), []).append(i)
    for size, members in by_size.items():
        if size == 0:
            lo[members] = hi[members] = 1.0
            continue
        for c in range(0, len(members), chunk):
            ids = np.array(members[c:c + chunk])
            idx = np.stack([supports[i] for i in ids])
            G = gram[idx[:, :, None], idx[:, None, :]]
            w, V = np.linalg.eigh(G)
            lo[ids], hi[ids] = w[:, 0], w[:, -1]
            rows = ids[:, None]
            vlo[rows, idx] = V[:, :, 0]
            vhi[rows, idx] = V[:, :, -1]
    return lo, hi, vlo, vhi


def rip_exact(A: MeasureOp, model: LevelsModel, budget: int = DEFAULT_BUDGET) -> RipReport:
    """Exact RIP constant of ``A`` on Σ − Σ by enumerating maximal secant supports.

    Only supports of full size ``min(2 k_j, |G_j|)`` are visited: restricted
    eigenvalues of a sub-support interlace those of its supersets. Raises
    :class:`BudgetExceeded` when the enumeration is larger than ``budget``.
    """
    if A.input_dim != model.ambient_dim:
        raise ValueError("operator and model dimensions differ")
    supports = _secant_supports(model, budget)
    lo, hi, vlo, vhi = _restricted_extremes(A, supports)
    dev = np.maximum(hi - 1.0, 1.0 - lo)
    i = int(np.argmax(dev))
    vec = vhi[i] if hi[i] - 1.0 >= 1.0 - lo[i] else vlo[i]
    return RipReport(max(float(dev[i]), 0.0), "exact-enumeration", len(supports), A.seed, budget, vec)


def extremal_secant_sampler(A: MeasureOp, model: LevelsModel, budget: int = DEFAULT_BUDGET) -> FixedVectors:
    """Top and bottom restricted eigenvectors of every maximal secant support."""
    if A.input_dim != model.ambient_dim:
        raise ValueError("operator and model dimensions differ")
    supports = _secant_supports(model, budget)
    _, _, vlo, vhi = _restricted_extremes(A, supports)
    out = np.empty((2 * len(supports), A.input_dim))
    out[0::2] = vhi
    out[1::2] = vlo
    return FixedVectors(out)


# -- ensemble diagnostics -------------------------------------------------------


@dataclass
class IsotropyResult:
    mean: np.ndarray
    std_error: np.ndarray
    half_width: np.ndarray
    target: np.ndarray
    trials: int

    @property
    def deviation(self) -> np.ndarray:
        return self.mean - self.target

    def within(self, n_se: float = 3.0) -> np.ndarray:
        return np.abs(self.deviation) <= n_se * self.std_error


def isotropy_check(kind: str, x, trials: int, seed=0, m: int = 25, z: float = 3.0,
                   chunk: int = 2000) -> IsotropyResult:
    """Monte-Carlo mean of ``‖Mx‖²`` over fresh draws of ``M``.

    ``x`` may be a single vector or a stack of vectors (rows); each trial
    draws one ``M`` and applies it to all of them. Chunk ``c`` uses the
    stream ``default_rng([seed, c])``, so results do not depend on scheduling.
    """
    if trials < 100:
        raise ValueError("isotropy_check needs at least 100 trials")
    X = np.atleast_2d(np.asarray(x, dtype=float))
    d = X.shape[1]
    s1 = np.zeros(len(X))
    s2 = np.zeros(len(X))
    for c, start in enumerate(range(0, trials, chunk)):
        count = min(chunk, trials - start)
        rng = np.random.default_rng([int(seed), c])
        M = random_matrices(kind, m, d, count, rng)
        sq = np.sum((M @ X.T) ** 2, axis=1)  # (count, len(X))
        s1 += sq.sum(axis=0)
        s2 += (sq ** 2).sum(axis=0)
    mean = s1 / trials
    var = np.maximum(s2 / trials - mean ** 2, 0.0) * trials / (trials - 1)
    se = np.sqrt(var / trials)
    target = np.sum(X ** 2, axis=1)
    squeeze = np.asarray(x).ndim == 1
    pick = (lambda a: a[0]) if squeeze else (lambda a: a)
    return IsotropyResult(pick(mean), pick(se), pick(z * se), pick(target), trials)


@dataclass
class ConcentrationTable:
    lambdas: np.ndarray
    tail_prob: np.ndarray
    tail_events: np.ndarray
    in_fit: np.ndarray
    c1: float
    c2: float
    crossover: float
    m: int
    trials: int

    def rows(self) -> list[dict]:
        return [
            {"lambda": float(l), "tail_prob": float(p), "events": int(e), "in_fit": bool(f)}
            for l, p, e, f in zip(self.lambdas, self.tail_prob, self.tail_events, self.in_fit)
        ]


def concentration_probe(kind: str, y, z, lambda_grid: Sequence[float], trials: int, seed=0,
                        m: int = 50, min_events: int = 50, chunk: int = 5000) -> ConcentrationTable:
    """Empirical tails of ``|h_M(y) - h_M(z)| >= λ‖y − z‖`` with ``h_M(x) = ‖Mx‖² − ‖x‖²``.

    ``c1`` is the least-squares slope (through the origin) of ``-log(P/2)``
    against ``m λ²`` and ``c2`` that of ``-log(P/2)`` against ``m λ``. The
    crossover ``λ = c2/c1`` splits the two regimes; only grid points with at
    least ``min_events`` tail events enter the fits, and the sub-Gaussian fit
    is refitted on points below the crossover.
    """
    lambdas = np.asarray(lambda_grid, dtype=float)
    if np.any(lambdas <= 0) or np.any(np.diff(lambdas) <= 0):
        raise ValueError("lambda_grid must be positive and increasing")
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    gap = float(np.linalg.norm(y - z))
    events = np.zeros(len(lambdas), dtype=int)
    if gap > 0:
        V = np.stack([y, z])
        base = np.sum(V ** 2, axis=1)
        for c, start in enumerate(range(0, trials, chunk)):
            count = min(chunk, trials - start)
            M = random_matrices(kind, m, len(y), count, np.random.default_rng([int(seed), c]))
            h = np.sum((M @ V.T) ** 2, axis=1) - base
            diff = np.abs(h[:, 0] - h[:, 1]) / gap
            events += np.sum(diff[:, None] >= lambdas[None, :], axis=0)
    prob = events / trials
    usable = events >= min_events
    c1 = c2 = crossover = float("nan")
    in_fit = usable.copy()
    if np.any(usable):
        target = -np.log(prob[usable] / 2.0)
        a1 = m * lambdas[usable] ** 2
        a2 = m * lambdas[usable]
        c1 = float(a1 @ target / (a1 @ a1))
        c2 = float(a2 @ target / (a2 @ a2))
        crossover = c2 / c1 if c1 > 0 else float("inf")
        below = usable & (lambdas <= crossover)
        if np.count_nonzero(below) >= 2:
            t = -np.log(prob[below] / 2.0)
            a = m * lambdas[below] ** 2
            c1 = float(a @ t / (a @ a))
            in_fit = below
    return ConcentrationTable(lambdas, prob, events, in_fit, c1, c2, crossover, m, trials)


# -- measurement-count bounds ----------------------------------------------------


def _ceil(value: float) -> int:
    # absorb float noise so exact integers are not bumped up by one ulp
    return int(math.ceil(value - 1e-9 * max(1.0, abs(value))))


def sufficient_m_general(s: float, alpha_S: float, xi: float, delta0: float,
                         c1: float, c2: float, C_abs: float = 1.0) -> int:
    """Measurements for RIP constant ``delta0`` with probability ``1 - xi``.

    ``m >= (1/delta0²) (C/min(c1,c2)) max{s log(1/alpha_S), log(6/xi)}``,
    natural logarithms, ``C_abs`` supplied by the caller.
    """
    if not 0 < delta0 < 1:
        raise ValueError("delta0 must lie in (0, 1)")
    if not 0 < xi < 1:
        raise ValueError("xi must lie in (0, 1)")
    if not 0 < alpha_S < 0.5:
        raise ValueError("alpha_S must lie in (0, 1/2)")
    if not s > 0 or not C_abs > 0 or not c1 > 0 or not c2 > 0:
        raise ValueError("s, C_abs, c1 and c2 must be positive")
    bound = max(s * math.log(1.0 / alpha_S), math.log(6.0 / xi))
    return _ceil(C_abs / min(c1, c2) * bound / delta0 ** 2)


def sufficient_m_levels(model: LevelsModel, C_abs: float = 1.0) -> int:
    """``C · J · Σ_j (k_j d_j + k_j log(3e|G_j|/k_j))`` rounded up."""
    if not C_abs > 0:
        raise ValueError("C_abs must be positive")
    total = 0.0
    for lv in model.levels:
        if lv.k == 0:
            continue
        G = lv.groups.n_groups
        total += lv.k * lv.groups.max_group_size + lv.k * math.log(3.0 * math.e * G / lv.k)
    return _ceil(C_abs * model.n_levels * total)
