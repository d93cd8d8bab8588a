"""Secant-set geometry: covers, box-counting dimension, cover-spanned subspaces.

Secant clouds come from *samplers*: any callable ``sampler(count, rng)``
returning a ``(count, n)`` array of unit vectors. The covering machinery is
greedy farthest-point traversal, which only upper-bounds covering numbers of
the sampled cloud.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .models import LevelsModel, sample_secants

Sampler = Callable[[int, np.random.Generator], np.ndarray]


# -- samplers -------------------------------------------------------------------


@dataclass(frozen=True)
class ModelSecants:
    """I.i.d. normalized secants of a model (difference of two random members)."""

    model: LevelsModel

    def __call__(self, count: int, rng: np.random.Generator) -> np.ndarray:
        return sample_secants(self.model, count, rng)


@dataclass(frozen=True)
class UnitSphere:
    """Uniform samples on the unit sphere of R^dim (dim=2 is the circle)."""

    dim: int

    def __call__(self, count: int, rng: np.random.Generator) -> np.ndarray:
        g = rng.standard_normal((count, self.dim))
        return g / np.linalg.norm(g, axis=1, keepdims=True)


@dataclass(frozen=True)
class FixedVectors:
    """Cycles through a fixed list of vectors; ``len()`` is the list length."""

    vectors: np.ndarray

    def __len__(self) -> int:
        return len(self.vectors)

    def __call__(self, count: int, rng: np.random.Generator | None = None) -> np.ndarray:
        vectors = np.asarray(self.vectors, dtype=float)
        reps = -(-count // len(vectors))
        return np.tile(vectors, (reps, 1))[:count]


def draw(sampler: Sampler, count: int, seed) -> np.ndarray:
    """Materialize ``count`` samples with a generator seeded from ``seed``."""
    return np.asarray(sampler(count, np.random.default_rng(seed)), dtype=float)


# -- covers -----------------------------------------------------------------------


@dataclass
class CoverResult:
    radius: float
    centers: np.ndarray
    center_indices: np.ndarray
    samples_used: int
    max_distance: float

    @property
    def size(self) -> int:
        return len(self.centers)


def farthest_point_radii(samples: np.ndarray, stop_radius: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Farthest-point traversal of ``samples``.

    Returns ``(order, radii)`` where ``order[:i]`` are the first ``i``
    centers and ``radii[i-1]`` is the covering radius they achieve. The
    traversal starts at sample 0 and stops once the radius is ``<= stop_radius``.
    Ties pick the smallest sample index.
    """
    X = np.asarray(samples, dtype=float)
    if X.ndim != 2 or len(X) == 0:
        raise ValueError("samples must be a nonempty 2-D array")
    sq = np.einsum("ij,ij->i", X, X)
    dist = np.sqrt(np.maximum(sq + sq[0] - 2.0 * X @ X[0], 0.0))
    dist[0] = 0.0
    order = [0]
    radii = [float(dist.max())]
    while radii[-1] > stop_radius:
        nxt = int(np.argmax(dist))
        order.append(nxt)
        d_new = np.sqrt(np.maximum(sq + sq[nxt] - 2.0 * X @ X[nxt], 0.0))
        d_new[nxt] = 0.0
        np.minimum(dist, d_new, out=dist)
        radii.append(float(dist.max()))
    return np.array(order, dtype=int), np.array(radii)


def greedy_cover(samples, alpha: float) -> CoverResult:
    """Greedy farthest-point cover: every sample ends within ``alpha`` of a center.

    Centers are a subset of the samples. The count upper-bounds the covering
    number of the sampled cloud, with no optimality claim.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    X = np.asarray(samples, dtype=float)
    order, radii = farthest_point_radii(X, stop_radius=alpha)
    size = int(np.argmax(radii <= alpha)) + 1
    idx = order[:size]
    return CoverResult(alpha, X[idx].copy(), idx, len(X), float(radii[size - 1]))


def cover_counts(samples, alphas: Sequence[float]) -> np.ndarray:
    """Greedy cover sizes for every radius in ``alphas`` from one traversal."""
    alphas = np.asarray(alphas, dtype=float)
    if np.any(alphas <= 0):
        raise ValueError("radii must be positive")
    _, radii = farthest_point_radii(samples, stop_radius=float(alphas.min()))
    # smallest i with radii[i-1] <= alpha; radii is nonincreasing
    return np.array([int(np.argmax(radii <= a)) + 1 for a in alphas], dtype=int)


# -- box-counting dimension ------------------------------------------------------


@dataclass
class BoxDimEstimate:
    alphas: np.ndarray
    counts: np.ndarray
    slope: float
    intercept: float
    r2: float
    alpha_S: float
    fit_indices: np.ndarray
    status: str = "ok"
    samples: int = 0
    seed: int | None = None

    def summary(self) -> dict:
        return {
            "slope": float(self.slope),
            "intercept": float(self.intercept),
            "alpha_S": float(self.alpha_S),
            "r2": float(self.r2),
        }


def _linfit(u: np.ndarray, v: np.ndarray) -> tuple[float, float, float]:
    slope, intercept = np.polyfit(u, v, 1)
    resid = v - (slope * u + intercept)
    ss_tot = float(np.sum((v - v.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


def fit_boxdim(alphas, counts, r2_min: float = 0.98, fit_range: tuple[float, float] | None = None,
               min_points: int = 3) -> BoxDimEstimate:
    """Least-squares slope of ``log N`` against ``log(1/alpha)``.

    All grid points with ``fit_range[0] <= alpha <= fit_range[1]`` enter the
    fit (the whole grid by default). ``alpha_S`` is the largest radius such
    that the points at or below it still fit a line with ``R^2 >= r2_min``.
    """
    alphas = np.asarray(alphas, dtype=float)
    counts = np.asarray(counts)
    u = np.log(1.0 / alphas)
    v = np.log(counts.astype(float))
    sel = np.arange(len(alphas))
    if fit_range is not None:
        lo, hi = fit_range
        sel = np.nonzero((alphas >= lo) & (alphas <= hi))[0]
        if len(sel) < 2:
            raise ValueError("fit_range keeps fewer than two grid points")
    if np.all(counts[sel] == counts[sel][0]):
        warnings.warn("all cover counts are equal; box-counting fit is degenerate", RuntimeWarning)
        return BoxDimEstimate(alphas, counts, 0.0, float(v[sel][0]), 1.0, float(alphas[sel][0]),
                              sel, status="degenerate")
    slope, icpt, r2 = _linfit(u[sel], v[sel])
    status = "ok" if r2 >= r2_min else "nonlinear"
    alpha_S = float(alphas[sel][-1])
    for start in range(len(sel) - min_points + 1):
        tail = sel[start:]
        if _linfit(u[tail], v[tail])[2] >= r2_min:
            alpha_S = float(alphas[tail[0]])
            break
    return BoxDimEstimate(alphas, counts, slope, icpt, r2, alpha_S, sel, status=status)


def estimate_boxdim(sampler: Sampler, alpha_grid: Sequence[float], samples_per_level: int,
                    seed=0, r2_min: float = 0.98,
                    fit_range: tuple[float, float] | None = None) -> BoxDimEstimate:
    """Box-counting dimension of a sampled secant cloud.

    One cloud of ``samples_per_level`` samples is covered at every radius of
    the (strictly decreasing) grid, so counts are monotone by construction.
    """
    alphas = np.asarray(alpha_grid, dtype=float)
    if alphas.ndim != 1 or len(alphas) < 4:
        raise ValueError("alpha_grid needs at least 4 radii")
    if np.any(np.diff(alphas) >= 0) or np.any(alphas <= 0):
        raise ValueError("alpha_grid must be positive and strictly decreasing")
    X = draw(sampler, samples_per_level, seed)
    est = fit_boxdim(alphas, cover_counts(X, alphas), r2_min=r2_min, fit_range=fit_range)
    est.samples = samples_per_level
    est.seed = seed if isinstance(seed, int) else None
    return est


# -- cover-spanned subspace ------------------------------------------------------


@dataclass
class SubspaceBasis:
    """Orthonormal rows spanning H inside R^n."""

    basis: np.ndarray

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def ambient_dim(self) -> int:
        return self.basis.shape[1]

    def coordinates(self, x: np.ndarray) -> np.ndarray:
        """Coordinates of ``P_H x`` in this basis (last axis)."""
        return np.asarray(x, dtype=float) @ self.basis.T

    def project(self, x: np.ndarray) -> np.ndarray:
        return self.coordinates(x) @ self.basis


def build_subspace(cover: CoverResult | np.ndarray, rtol: float = 1e-10) -> SubspaceBasis:
    """Orthonormal basis of the span of the cover centers (SVD, rank-revealing)."""
    C = cover.centers if isinstance(cover, CoverResult) else np.asarray(cover, dtype=float)
    if C.ndim != 2 or len(C) == 0:
        raise ValueError("need at least one center")
    _, s, vt = np.linalg.svd(C, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return SubspaceBasis(np.zeros((0, C.shape[1])))
    rank = int(np.sum(s > rtol * s[0]))
    return SubspaceBasis(vt[:rank].copy())


@dataclass
class ProjectionCertificate:
    alpha_hat: float
    trials: int
    worst_index: int
    max_contraction: float


def certify_projection(H: SubspaceBasis, secants, trials: int | None = None, seed=0) -> ProjectionCertificate:
    """Worst relative residual ``max(1 - ||P_H z||)`` over unit secants.

    ``secants`` is either an array of unit vectors or a sampler (then
    ``trials`` samples are drawn). Asserts ``||P_H z|| <= ||z||``.
    """
    if callable(secants) and not isinstance(secants, np.ndarray):
        if trials is None or trials < 1:
            raise ValueError("trials must be >= 1 when sampling")
        Z = draw(secants, trials, seed)
    else:
        Z = np.atleast_2d(np.asarray(secants, dtype=float))
    norms = np.linalg.norm(Z, axis=1)
    proj = np.linalg.norm(H.coordinates(Z), axis=1) if H.dim else np.zeros(len(Z))
    ratio = np.divide(proj, norms, out=np.zeros_like(proj), where=norms > 0)
    if np.any(ratio > 1.0 + 1e-10):
        raise AssertionError("projection increased a norm; basis is not orthonormal")
    resid = np.clip(1.0 - ratio, 0.0, 1.0)
    worst = int(np.argmax(resid))
    return ProjectionCertificate(float(resid[worst]), len(Z), worst, float(ratio.max()))
