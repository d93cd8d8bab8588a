"""Atomic-norm regularizers for group sparsity in levels.

Three kinds are supported:

``l1``
    sum of absolute values of all coordinates.
``group-levels``
    ``f_w(x) = sum_j w_j sum_{g in G_j} ||x_g||``; coordinates outside every
    group make the value ``+inf`` (they are outside the span of the atoms).
``sigma-norm``
    the atomic norm whose atoms are the unit vectors of the model itself
    (the group k-support norm in levels).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .jsonspec import SpecDoc
from .measurements import MeasureOp
from .models import DEFAULT_SUPPORT_TOL, LevelsModel, groups_mask, top_groups

KINDS = ("l1", "group-levels", "sigma-norm")
DEFAULT_BUDGET = 10**5


@dataclass(frozen=True)
class Regularizer:
    kind: str
    model: LevelsModel
    weights: tuple[float, ...] | None = None
    budget: int = DEFAULT_BUDGET

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown regularizer kind {self.kind!r}")
        if self.kind == "group-levels":
            if self.weights is None:
                object.__setattr__(self, "weights", (1.0,) * self.model.n_levels)
            w = tuple(float(v) for v in self.weights)
            if len(w) != self.model.n_levels:
                raise ValueError("need one weight per level")
            if any(not v > 0 or not math.isfinite(v) for v in w):
                raise ValueError("weights must be positive and finite")
            object.__setattr__(self, "weights", w)

    @classmethod
    def l1(cls, model: LevelsModel) -> "Regularizer":
        return cls("l1", model)

    @classmethod
    def group_levels(cls, model: LevelsModel, weights: Sequence[float] | None = None) -> "Regularizer":
        return cls("group-levels", model, None if weights is None else tuple(weights))

    @classmethod
    def adapted(cls, model: LevelsModel) -> "Regularizer":
        """``f_w`` with ``w_j = 1/sqrt(k_j)`` (levels with ``k_j = 0`` get weight 1)."""
        return cls.group_levels(model, [1.0 / math.sqrt(k) if k > 0 else 1.0 for k in model.sparsities])

    @classmethod
    def sigma_norm(cls, model: LevelsModel, budget: int = DEFAULT_BUDGET) -> "Regularizer":
        return cls("sigma-norm", model, budget=budget)

    @property
    def group_weights(self) -> np.ndarray:
        """Weight of every global group id."""
        _, level_of, _ = self.model.group_index
        return np.asarray(self.weights, dtype=float)[level_of]

    @property
    def coordinate_weights(self) -> np.ndarray:
        """Weight of the group owning each coordinate (0 off-group)."""
        gid = self.model.group_index[0]
        return np.where(gid >= 0, self.group_weights[np.maximum(gid, 0)], 0.0)

    def __call__(self, x) -> float:
        return eval_f(self, x)

    def label(self) -> str:
        if self.kind == "group-levels":
            return "group-levels(" + ",".join(f"{w:.6g}" for w in self.weights) + ")"
        return self.kind


def regularizer_from_spec(spec, model: LevelsModel, doc: SpecDoc | None = None, path: tuple = ()) -> Regularizer:
    """``{"kind": "l1" | "group-levels" | "sigma-norm", "weights": [...] | "adapted" | "unit"}``."""
    doc = doc or SpecDoc.from_value(spec)
    if not isinstance(spec, dict):
        raise doc.error(path, "regularizer spec must be an object")
    for key in spec:
        if key not in ("kind", "weights", "budget"):
            raise doc.error(path + (key,), f"unknown key {key!r}")
    kind = spec.get("kind")
    if kind not in KINDS:
        raise doc.error(path + ("kind",), f"kind must be one of {', '.join(KINDS)}")
    if kind == "l1":
        return Regularizer.l1(model)
    if kind == "sigma-norm":
        return Regularizer.sigma_norm(model, spec.get("budget", DEFAULT_BUDGET))
    weights = spec.get("weights", "unit")
    if weights == "adapted":
        return Regularizer.adapted(model)
    if weights == "unit":
        return Regularizer.group_levels(model)
    if (not isinstance(weights, list) or len(weights) != model.n_levels
            or not all(isinstance(w, (int, float)) and not isinstance(w, bool) and w > 0 for w in weights)):
        raise doc.error(path + ("weights",), f"weights must be 'adapted', 'unit' or {model.n_levels} positive numbers")
    return Regularizer.group_levels(model, weights)


def _check_dim(x, model: LevelsModel) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != model.ambient_dim:
        raise ValueError(f"expected vectors of length {model.ambient_dim}, got {x.shape[-1]}")
    return x


def eval_f(f: Regularizer, x) -> float:
    """Value of the regularizer (``inf`` outside the span of its atoms)."""
    x = _check_dim(x, f.model)
    if f.kind == "l1":
        return float(np.sum(np.abs(x)))
    if f.kind == "sigma-norm":
        return sigma_norm(x, f.model)
    if np.any(x[~f.model.covered] != 0):
        return math.inf
    return float(f.group_weights @ f.model.group_norms(x))


def prox_f(f: Regularizer, z, lam: float) -> np.ndarray:
    """``argmin_x lam f(x) + ||x - z||^2 / 2`` (block soft thresholding)."""
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    z = _check_dim(z, f.model)
    if f.kind == "l1":
        return np.sign(z) * np.maximum(np.abs(z) - lam, 0.0)
    if f.kind != "group-levels":
        raise ValueError("prox is implemented for l1 and group-levels regularizers")
    model = f.model
    gid = model.group_index[0]
    cov = model.covered
    if model.singleton_groups:
        thr = lam * f.coordinate_weights
        return np.where(cov, np.sign(z) * np.maximum(np.abs(z) - thr, 0.0), 0.0)
    norms = model.group_norms(z)
    thresh = lam * f.group_weights
    scale = np.where(norms > thresh, 1.0 - np.divide(thresh, norms, out=np.zeros_like(norms), where=norms > 0), 0.0)
    out = np.zeros_like(z)
    out[cov] = z[cov] * scale[gid[cov]]
    return out


def project_dual_ball(f: Regularizer, u) -> np.ndarray:
    """Projection onto ``{u : f*(u) = 0}``, the unit ball of the dual norm.

    For ``l1`` this clips to ``[-1, 1]``; for group norms each group is pulled
    into the ball of radius ``w_j``. Coordinates outside every group are free.
    """
    u = _check_dim(u, f.model)
    if f.kind == "l1":
        return np.clip(u, -1.0, 1.0)
    if f.kind != "group-levels":
        raise ValueError("dual-ball projection is implemented for l1 and group-levels")
    model = f.model
    gid = model.group_index[0]
    cov = model.covered
    norms = model.group_norms(u)
    w = f.group_weights
    scale = np.where(norms > w, np.divide(w, norms, out=np.ones_like(norms), where=norms > 0), 1.0)
    out = u.copy()
    out[cov] = u[cov] * scale[gid[cov]]
    return out


def dual_norm(f: Regularizer, u) -> float:
    """Dual norm ``sup {<u, x> : f(x) <= 1}``."""
    u = _check_dim(u, f.model)
    model = f.model
    if f.kind == "l1":
        return float(np.max(np.abs(u), initial=0.0))
    if np.any(u[~model.covered] != 0) and f.kind == "group-levels":
        return math.inf
    norms = model.group_norms(u)
    if f.kind == "group-levels":
        return float(np.max(norms / f.group_weights, initial=0.0))
    return sigma_dual_norm(u, model)


# -- the Σ-norm ------------------------------------------------------------------


def k_support_norm(r, k: int) -> float:
    """k-support norm of a vector (closed form on sorted magnitudes)."""
    a = np.sort(np.abs(np.asarray(r, dtype=float)))[::-1]
    d = a.size
    if k <= 0:
        return 0.0 if not np.any(a) else math.inf
    if k >= d:
        return float(np.linalg.norm(a))
    tail = np.cumsum(a[::-1])[::-1]  # tail[i] = sum(a[i:])
    for r_ in range(k):
        head = k - r_ - 1  # number of entries kept individually
        avg = tail[head] / (r_ + 1)
        upper = math.inf if head == 0 else a[head - 1]
        if upper > avg >= a[head]:
            return float(math.sqrt(np.sum(a[:head] ** 2) + tail[head] ** 2 / (r_ + 1)))
    # floating-point ties can miss the strict inequality; take the best candidate
    vals = [np.sum(a[:k - r_ - 1] ** 2) + tail[k - r_ - 1] ** 2 / (r_ + 1) for r_ in range(k)]
    return float(math.sqrt(max(vals)))


def sigma_dual_norm(u, model: LevelsModel) -> float:
    """``max_S ||u_S||`` over admissible supports: top ``k_j`` groups per level."""
    u = _check_dim(u, model)
    norms = model.group_norms(u)
    keep = top_groups(norms, model)
    return float(math.sqrt(np.sum(norms[keep] ** 2)))


def sigma_norm(v, model: LevelsModel) -> float:
    """Atomic norm with atoms ``Σ ∩ S(1)``: the group k-support norm in levels.

    The dual norm is the ℓ2 combination over levels of the per-level
    ``top-k_j`` group norms, so the norm is the ℓ2 combination of per-level
    k-support norms of the group-norm vector. ``inf`` if ``v`` has mass off
    the atoms' span.
    """
    v = _check_dim(v, model)
    if np.any(v[~model.covered] != 0):
        return math.inf
    norms = model.group_norms(v)
    offsets = model.group_index[2]
    total = 0.0
    for j, lv in enumerate(model.levels):
        val = k_support_norm(norms[offsets[j]:offsets[j + 1]], lv.k)
        if math.isinf(val):
            return math.inf
        total += val ** 2
    return math.sqrt(total)


@dataclass
class LatentNormResult:
    value: float
    lower_bound: float
    gap: float
    iterations: int
    converged: bool
    supports: int


def sigma_norm_small(v, model: LevelsModel, budget: int = DEFAULT_BUDGET, tol: float = 1e-8,
                     max_iter: int = 200_000) -> LatentNormResult:
    """Σ-norm by its latent decomposition over enumerated supports.

    Solves ``min sum_S ||u_S||`` subject to ``sum_S u_S = v`` (one block per
    maximal admissible support) with a primal-dual splitting, stopping when
    the duality gap is below ``tol * (1 + value)``. The primal value is made
    exactly feasible before the gap is measured, and the dual point is scaled
    into the dual unit ball, so ``lower_bound <= ||v||_Σ <= value`` always.
    """
    v = _check_dim(v, model)
    if np.any(v[~model.covered] != 0):
        return LatentNormResult(math.inf, math.inf, 0.0, 0, True, 0)
    supports = [model.support_coordinates(s) for s in model.iter_supports(maximal=True, budget=budget)]
    if not np.any(v):
        return LatentNormResult(0.0, 0.0, 0.0, 0, True, len(supports))
    n = model.ambient_dim
    sizes = np.array([len(s) for s in supports])
    flat = np.concatenate(supports)
    owner = np.repeat(np.arange(len(supports)), sizes)
    cover_count = np.bincount(flat, minlength=n)
    if np.any(cover_count[model.covered] == 0):
        return LatentNormResult(math.inf, math.inf, 0.0, 0, True, len(supports))

    # a fixed assignment of every coordinate to one support, to repair feasibility
    first_owner = np.full(n, -1)
    for pos in range(len(flat) - 1, -1, -1):
        first_owner[flat[pos]] = pos

    L = math.sqrt(cover_count.max())  # ||B|| for B: stacked blocks -> sum
    tau = sigma = 0.99 / L
    u = np.zeros(len(flat))
    y = np.zeros(n)
    u_bar = u.copy()

    def block_norms(w):
        return np.sqrt(np.bincount(owner, weights=w ** 2, minlength=len(supports)))

    best_val, best_lb = math.inf, 0.0
    it = 0
    for it in range(1, max_iter + 1):
        # dual ascent on the equality constraint B u = v
        y = y + sigma * (np.bincount(flat, weights=u_bar, minlength=n) - v)
        # primal: block soft-thresholding of u - tau B^T y
        w = u - tau * y[flat]
        bn = block_norms(w)
        shrink = np.where(bn > tau, 1.0 - tau / np.where(bn > 0, bn, 1.0), 0.0)
        u_new = w * shrink[owner]
        u_bar = 2 * u_new - u
        u = u_new
        if it % 50 == 0 or it == max_iter:
            resid = v - np.bincount(flat, weights=u, minlength=n)
            fixed = u.copy()
            cov_idx = np.nonzero(model.covered)[0]
            fixed[first_owner[cov_idx]] += resid[cov_idx]
            best_val = min(best_val, float(block_norms(fixed).sum()))
            cand = -y
            dn = float(np.sqrt(np.max(np.bincount(owner, weights=cand[flat] ** 2, minlength=len(supports)))))
            if dn > 0:
                best_lb = max(best_lb, float(v @ cand) / dn)
            if best_val - best_lb <= tol * (1.0 + best_val):
                return LatentNormResult(best_val, best_lb, best_val - best_lb, it, True, len(supports))
    return LatentNormResult(best_val, best_lb, best_val - best_lb, it, False, len(supports))


# -- distances and constants -----------------------------------------------------


def anorm(x, A: MeasureOp, C: float) -> float:
    """``C ||A x|| + ||x||``."""
    if C < 0:
        raise ValueError("C must be nonnegative")
    x = np.asarray(x, dtype=float)
    return float(C * np.linalg.norm(A.apply(x)) + np.linalg.norm(x))


def best_f_approx(x, f: Regularizer) -> np.ndarray:
    """Element of Σ minimizing ``f(x - ·)``: keep the groups of largest f-contribution."""
    model = f.model
    x = _check_dim(x, model)
    if f.kind == "l1":
        gid = model.group_index[0]
        cov = model.covered
        scores = np.bincount(gid[cov], weights=np.abs(x[cov]), minlength=model.total_groups)
    elif f.kind == "group-levels":
        scores = f.group_weights * model.group_norms(x)
    else:
        raise ValueError("best_f_approx needs a separable regularizer (l1 or group-levels)")
    keep = top_groups(scores, model)
    return np.where(groups_mask(keep, model), x, 0.0)


def dist_f(x, model: LevelsModel, f: Regularizer) -> float:
    """Symmetrized f-distance from ``x`` to the model (exact for l1 / group norms)."""
    if f.model != model:
        f = Regularizer(f.kind, model, f.weights, f.budget)
    x = _check_dim(x, model)
    return eval_f(f, x - best_f_approx(x, f))


@dataclass(frozen=True)
class StabilityConstants:
    J: int
    k: tuple[int, ...]
    delta: float
    delta0: float
    C_sigma: float
    D_sigma: float


def delta0_levels(J: int) -> float:
    """Largest admissible RIP constant: ``1/sqrt 2`` for one level, ``1/sqrt(2+J)`` otherwise."""
    if J < 1:
        raise ValueError("J must be >= 1")
    return 1 / math.sqrt(2) if J == 1 else math.sqrt(1.0 / (2 + J))


def stability_constants(J: int, k, delta: float) -> StabilityConstants:
    """Error-bound constants for ``f_w`` with ``w_j = 1/sqrt(k_j)``.

    ``||x* - x|| <= C (||e|| + eps) + D d_f(x, Σ)`` whenever the RIP constant
    on Σ − Σ is ``delta < delta0(J)``.
    """
    k = tuple(int(v) for v in np.atleast_1d(k))
    if len(k) != J:
        raise ValueError("k must have one entry per level")
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    d0 = delta0_levels(J)
    if delta >= d0:
        raise ValueError(f"delta={delta} is not below delta0={d0:.6f}; the constants blow up")
    root = math.sqrt(1 + delta)
    if J == 1:
        if k[0] < 1:
            raise ValueError("k must be positive")
        C = 2 * root / (1 - delta * math.sqrt(2))
        D = 2 * (1 + root * C) / math.sqrt(k[0])
    else:
        C = (1 + math.sqrt(1 + J)) * root / (1 - delta * math.sqrt(2 + J))
        D = 2 * math.sqrt(2) * (1 + root * C)
    return StabilityConstants(J, k, float(delta), d0, C, D)


def estimate_anorm_constant(f: Regularizer, A: MeasureOp, C: float, probes: int = 1000, seed=0) -> float:
    """Monte-Carlo lower estimate of ``sup_u ||u||_{A,C} / f(u)`` over random probes.

    Probes are Gaussian vectors on the span of the atoms plus model vectors;
    the returned maximum never certifies the supremum.
    """
    rng = np.random.default_rng(seed)
    model = f.model
    best = 0.0
    for i in range(probes):
        u = rng.standard_normal(model.ambient_dim) * model.covered
        if i % 2:
            keep = top_groups(rng.random(model.total_groups), model)
            u = np.where(groups_mask(keep, model), u, 0.0)
        fu = eval_f(f, u)
        if fu > DEFAULT_SUPPORT_TOL:
            best = max(best, anorm(u, A, C) / fu)
    return best
