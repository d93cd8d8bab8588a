"""Sufficient RIP constants for a regularizer: δ_Σ(x, z), descent vectors, bounds.

``delta_sigma_empirical`` produces an *upper-bound estimate* of δ_Σ(f): the
inner supremum over ``x`` is only approximated from below by a finite
candidate set, and the outer infimum runs over sampled descent vectors.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .models import BudgetExceeded, LevelsModel, best_model_approx, is_member, sample_model
from .regularizers import Regularizer, eval_f, sigma_norm

RADICAND_TOL = 1e-14
Direction = Callable[[np.random.Generator, int], np.ndarray]


def delta_xz(x, z, model: LevelsModel, norm=sigma_norm) -> float:
    """``-<x,z> / (||x|| sqrt(||x+z||_Σ² - ||x||² - 2<x,z>))``.

    Returns 0 when the numerator is ``<= 0`` and ``nan`` (undefined) when
    the radicand is ``<= 1e-14`` with a positive numerator.

    Raises
    ------
    ValueError
        If ``x`` is zero or not in the model.
    """
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    if x.shape != z.shape or x.shape != (model.ambient_dim,):
        raise ValueError("x and z must both have the model's ambient dimension")
    nx = float(np.linalg.norm(x))
    if nx == 0:
        raise ValueError("x must be nonzero")
    if not is_member(x, model):
        raise ValueError("x is not in the model")
    xz = float(x @ z)
    num = -xz
    if num <= 0:
        return 0.0
    rad = norm(x + z, model) ** 2 - nx * nx - 2 * xz
    if not rad > RADICAND_TOL:
        return math.nan
    return num / (nx * math.sqrt(rad))


def _gaussian_direction(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.standard_normal(n)


def sample_descent(f: Regularizer, model: LevelsModel, rng_seed=None,
                   direction: Direction | None = None, max_tries: int = 1000) -> tuple[np.ndarray, np.ndarray]:
    """A descent vector ``z`` of ``f`` at a random ``x`` in the model.

    ``x`` comes from ``sample_model``; a direction ``u`` (Gaussian on the
    covered coordinates unless ``direction`` is given) is scaled to
    ``y = t u`` with ``f(y) = f(x)``, and ``z = y - x``. The scale is the
    exact ratio ``f(x)/f(u)`` by homogeneity. Returns ``(z, x)``.
    """
    rng = np.random.default_rng(rng_seed)
    direction = direction or _gaussian_direction
    covered = model.covered
    n = model.ambient_dim
    for _ in range(max_tries):
        x = sample_model(model, rng)
        fx = eval_f(f, x)
        u = np.asarray(direction(rng, n), dtype=float)
        u = np.where(covered, u, 0.0)
        fu = eval_f(f, u)
        if fx == 0 or fu == 0 or not math.isfinite(fu):
            continue
        z = (fx / fu) * u - x
        if not np.any(z):
            continue
        if eval_f(f, x + z) > fx * (1 + 1e-12):
            raise AssertionError("sampled vector is not a descent vector")
        return z, x
    raise RuntimeError("could not draw a nonzero descent vector (trivial model or f?)")


def split_best_support(z, model: LevelsModel) -> tuple[np.ndarray, np.ndarray]:
    """``(z_T, z_Tc)`` with ``T`` the top-``k_j`` groups of each level by ``||z_g||``.

    Level weights do not change the per-level ranking, so they are not needed.
    """
    z = np.asarray(z, dtype=float)
    zT = best_model_approx(z, model)
    return zT, z - zT


def delta_heuristic(z, model: LevelsModel, norm=sigma_norm) -> float:
    """``δ(-z_T, z) = 1 / sqrt(||z_Tc||_Σ² / ||z_T||² + 1)``."""
    zT, zTc = split_best_support(z, model)
    nT = float(np.linalg.norm(zT))
    if nT == 0:
        raise ValueError("z_T is zero")
    return 1.0 / math.sqrt((norm(zTc, model) / nT) ** 2 + 1.0)


def kappa_w(model: LevelsModel, weights) -> float:
    """``max(w_j sqrt k_j) / min(w_j sqrt k_j)`` over levels with ``k_j > 0``."""
    w = np.asarray(weights, dtype=float)
    if w.shape != (model.n_levels,) or np.any(w <= 0):
        raise ValueError("need one positive weight per level")
    k = np.asarray(model.sparsities, dtype=float)
    s = (w * np.sqrt(k))[k > 0]
    return float(s.max() / s.min()) if s.size else 1.0


def delta_sigma_bounds(model: LevelsModel, weights) -> float:
    """Closed-form lower bound on δ_Σ(f_w).

    ``1/sqrt 2`` for one level, ``1/sqrt(2 + J κ_w²)`` otherwise.
    """
    kappa = kappa_w(model, weights)
    J = model.n_levels
    if J == 1:
        return 1 / math.sqrt(2)
    return 1 / math.sqrt(2 + J * kappa ** 2)


def level_weights(f: Regularizer) -> np.ndarray:
    """Per-level weights of ``f`` viewed as ``f_w`` (l1 only on singleton groups)."""
    if f.kind == "group-levels":
        return np.asarray(f.weights, dtype=float)
    if f.kind == "l1" and f.model.singleton_groups:
        return np.ones(f.model.n_levels)
    raise ValueError(f"{f.kind} is not a weighted group norm on this model")


@dataclass
class DeltaReport:
    lower_bound: float
    heuristic_values: list
    sup_estimates: list
    trials: int
    seed: int | None
    violations: list = field(default_factory=list)
    undefined: int = 0

    @property
    def empirical_min(self) -> float:
        return float(min(self.sup_estimates)) if self.sup_estimates else math.nan

    @property
    def heuristic_min(self) -> float:
        return float(min(self.heuristic_values)) if self.heuristic_values else math.nan

    def to_dict(self) -> dict:
        return {
            "lower_bound": float(self.lower_bound),
            "empirical_min": self.empirical_min,
            "heuristic_min": self.heuristic_min,
            "trials": int(self.trials),
            "seed": self.seed,
            "undefined": int(self.undefined),
            "violations": [dict(v) for v in self.violations],
        }


def _candidates(z: np.ndarray, model: LevelsModel, budget: int):
    """``-z_S`` and ``-z_S/||z_S||`` for every maximal admissible support."""
    for support in model.iter_supports(maximal=True, budget=budget):
        idx = model.support_coordinates(support)
        x = np.zeros_like(z)
        x[idx] = -z[idx]
        nx = np.linalg.norm(x)
        if nx > 0:
            yield x
            yield x / nx


def delta_sigma_empirical(f: Regularizer, model: LevelsModel | None = None, trials: int = 500, seed=0,
                          candidate_budget: int = 10_000, tol: float = 1e-9,
                          direction: Direction | None = None) -> DeltaReport:
    """Sandwich δ_Σ(f) between the closed-form bound and sampled estimates.

    For each sampled descent vector ``z`` the inner supremum is estimated by
    ``max(delta_heuristic(z), max_x delta_xz(x, z))`` over the candidates
    ``x = -z_S`` (and their unit rescaling) for every maximal support ``S``.
    ``empirical_min`` is the minimum of these estimates over ``z``. Any
    heuristic value below ``lower_bound - tol`` is a violation.
    """
    model = model or f.model
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if model.count_supports(maximal=True) > candidate_budget:
        raise BudgetExceeded("too many supports for the candidate search")
    bound = delta_sigma_bounds(model, level_weights(f))
    rng = np.random.default_rng(seed)
    heur, sups, violations = [], [], []
    undefined = 0
    for t in range(trials):
        z, _ = sample_descent(f, model, rng, direction=direction)
        h = delta_heuristic(z, model)
        best = h
        for x in _candidates(z, model, candidate_budget):
            d = delta_xz(x, z, model)
            if math.isnan(d):
                undefined += 1
            elif d > best:
                best = d
        heur.append(h)
        sups.append(best)
        if h < bound - tol:
            violations.append({"trial": t, "heuristic": h, "bound": bound})
    return DeltaReport(bound, heur, sups, trials, seed if isinstance(seed, int) else None,
                       violations, undefined)
