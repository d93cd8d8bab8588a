"""Group-sparse model sets in levels.

A :class:`LevelsModel` is a union of subspaces of R^n: the ambient
coordinates are split into disjoint levels, each level carries a partition of
(part of) its coordinates into groups, and a model vector may activate at
most ``k_j`` groups in level ``j``. Coordinates that belong to no group are
identically zero on the model.

Vectors are plain float64 numpy arrays.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Iterator, Sequence

import numpy as np

from .jsonspec import SpecDoc, SpecError

#: relative threshold (times ||x||) below which a group counts as inactive
DEFAULT_SUPPORT_TOL = 1e-12

MagnitudeLaw = Callable[[np.random.Generator, int], np.ndarray]


class BudgetExceeded(RuntimeError):
    """Raised instead of silently falling back when an enumeration is too large."""


def _as_vector(x, n: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != n:
        raise ValueError(f"expected a vector of length {n}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("model vectors must have finite entries")
    return x


@dataclass(frozen=True)
class GroupStructure:
    """Non-overlapping, nonempty groups of coordinates of R^ambient_dim."""

    ambient_dim: int
    groups: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        groups = tuple(tuple(int(i) for i in g) for g in self.groups)
        object.__setattr__(self, "groups", groups)
        if self.ambient_dim < 1:
            raise ValueError("ambient_dim must be positive")
        seen: set[int] = set()
        for gi, g in enumerate(groups):
            if not g:
                raise ValueError(f"group {gi} is empty")
            for i in g:
                if not 0 <= i < self.ambient_dim:
                    raise ValueError(f"group {gi}: index {i} outside [0, {self.ambient_dim})")
                if i in seen:
                    raise ValueError(f"group {gi}: index {i} appears in more than one group")
                seen.add(i)

    @classmethod
    def singletons(cls, ambient_dim: int, indices: Sequence[int] | None = None) -> "GroupStructure":
        if indices is None:
            indices = range(ambient_dim)
        return cls(ambient_dim, tuple((int(i),) for i in indices))

    @property
    def n_groups(self) -> int:
        return len(self.groups)

    @property
    def max_group_size(self) -> int:
        return max((len(g) for g in self.groups), default=0)

    @cached_property
    def coordinates(self) -> np.ndarray:
        return np.array(sorted(i for g in self.groups for i in g), dtype=int)

    @cached_property
    def _group_of(self) -> np.ndarray:
        gid = np.full(self.ambient_dim, -1, dtype=int)
        for gi, g in enumerate(self.groups):
            gid[list(g)] = gi
        return gid

    def group_norms(self, x: np.ndarray) -> np.ndarray:
        """Euclidean norm of ``x`` on each group (works on the last axis)."""
        x = np.asarray(x, dtype=float)
        gid = self._group_of
        mask = gid >= 0
        flat = x.reshape(-1, x.shape[-1])
        sq = np.zeros((flat.shape[0], self.n_groups))
        np.add.at(sq, (slice(None), gid[mask]), flat[:, mask] ** 2)
        return np.sqrt(sq.reshape(x.shape[:-1] + (self.n_groups,)))


def group_support(x, G: GroupStructure, tol: float | None = None) -> set[int]:
    """Indices of the groups ``g`` with ``||x_g|| > tol``.

    ``tol`` defaults to ``1e-12 * ||x||``.
    """
    x = _as_vector(x, G.ambient_dim)
    if tol is None:
        tol = DEFAULT_SUPPORT_TOL * float(np.linalg.norm(x))
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    norms = G.group_norms(x)
    return {int(g) for g in np.nonzero(norms > tol)[0]}


@dataclass(frozen=True)
class Level:
    groups: GroupStructure
    k: int


@dataclass(frozen=True)
class LevelsModel:
    """Structured sparsity in levels over R^n.

    Each entry of ``levels`` is a ``(GroupStructure, k_j)`` pair; all group
    structures share the ambient dimension and the coordinate blocks of
    distinct levels are disjoint.
    """

    levels: tuple[Level, ...]

    def __post_init__(self):
        levels = tuple(lv if isinstance(lv, Level) else Level(*lv) for lv in self.levels)
        object.__setattr__(self, "levels", levels)
        if not levels:
            raise ValueError("a model needs at least one level")
        n = levels[0].groups.ambient_dim
        used: set[int] = set()
        for j, lv in enumerate(levels):
            if lv.groups.ambient_dim != n:
                raise ValueError(f"level {j}: ambient_dim {lv.groups.ambient_dim} != {n}")
            if lv.k < 0:
                raise ValueError(f"level {j}: sparsity must be nonnegative")
            if lv.k > lv.groups.n_groups:
                raise ValueError(f"level {j}: k={lv.k} exceeds the {lv.groups.n_groups} groups")
            coords = set(lv.groups.coordinates.tolist())
            if coords & used:
                raise ValueError(f"level {j} overlaps the coordinates of an earlier level")
            used |= coords

    # -- constructors ---------------------------------------------------------

    @classmethod
    def sparse(cls, n: int, k: int) -> "LevelsModel":
        """Plain ``k``-sparse vectors of R^n (one level, singleton groups)."""
        return cls((Level(GroupStructure.singletons(n), k),))

    @classmethod
    def sparse_in_levels(cls, sizes: Sequence[int], ks: Sequence[int]) -> "LevelsModel":
        """Consecutive coordinate blocks of the given ``sizes``, singleton groups."""
        if len(sizes) != len(ks):
            raise ValueError("sizes and ks must have the same length")
        n = int(sum(sizes))
        start = 0
        levels = []
        for size, k in zip(sizes, ks):
            levels.append(Level(GroupStructure.singletons(n, range(start, start + size)), int(k)))
            start += size
        return cls(tuple(levels))

    @classmethod
    def block_sparse(cls, sizes: Sequence[int], group_size: int, ks: Sequence[int]) -> "LevelsModel":
        """Consecutive level blocks, each cut into contiguous groups of ``group_size``."""
        n = int(sum(sizes))
        start = 0
        levels = []
        for size, k in zip(sizes, ks):
            if size % group_size:
                raise ValueError("level sizes must be multiples of group_size")
            groups = tuple(tuple(range(s, s + group_size)) for s in range(start, start + size, group_size))
            levels.append(Level(GroupStructure(n, groups), int(k)))
            start += size
        return cls(tuple(levels))

    # -- structure ------------------------------------------------------------

    @property
    def ambient_dim(self) -> int:
        return self.levels[0].groups.ambient_dim

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    @property
    def sparsities(self) -> tuple[int, ...]:
        return tuple(lv.k for lv in self.levels)

    @property
    def group_counts(self) -> tuple[int, ...]:
        return tuple(lv.groups.n_groups for lv in self.levels)

    @property
    def group_sizes(self) -> tuple[int, ...]:
        """Largest group size ``d_j`` of each level."""
        return tuple(lv.groups.max_group_size for lv in self.levels)

    @cached_property
    def group_index(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Flat group bookkeeping ``(gid, level_of_group, group_offset)``.

        ``gid[i]`` is the global group id of coordinate ``i`` (-1 if the
        coordinate is in no group), ``level_of_group[g]`` the level of global
        group ``g``; level ``j`` owns ids ``group_offset[j]:group_offset[j+1]``.
        """
        gid = np.full(self.ambient_dim, -1, dtype=int)
        level_of = []
        offsets = [0]
        for j, lv in enumerate(self.levels):
            for gi, g in enumerate(lv.groups.groups):
                gid[list(g)] = offsets[-1] + gi
                level_of.append(j)
            offsets.append(offsets[-1] + lv.groups.n_groups)
        return gid, np.array(level_of, dtype=int), np.array(offsets, dtype=int)

    @property
    def total_groups(self) -> int:
        return int(self.group_index[2][-1])

    @cached_property
    def covered(self) -> np.ndarray:
        """Boolean mask of coordinates that belong to some group."""
        return self.group_index[0] >= 0

    @cached_property
    def singleton_groups(self) -> bool:
        return all(len(g) == 1 for lv in self.levels for g in lv.groups.groups)

    @cached_property
    def group_members(self) -> tuple[np.ndarray, ...]:
        """Coordinate indices of every global group id."""
        return tuple(np.array(g, dtype=int) for lv in self.levels for g in lv.groups.groups)

    def group_norms(self, x: np.ndarray) -> np.ndarray:
        """Norms of all groups of all levels (global ids, last axis)."""
        x = np.asarray(x, dtype=float)
        gid = self.group_index[0]
        cov = self.covered
        if x.ndim == 1:
            return np.sqrt(np.bincount(gid[cov], weights=x[cov] ** 2, minlength=self.total_groups))
        flat = x.reshape(-1, x.shape[-1])
        sq = np.zeros((flat.shape[0], self.total_groups))
        np.add.at(sq, (slice(None), gid[cov]), flat[:, cov] ** 2)
        return np.sqrt(sq.reshape(x.shape[:-1] + (self.total_groups,)))

    def doubled(self) -> "LevelsModel":
        """Model containing Σ − Σ: sparsity ``min(2 k_j, |G_j|)`` per level."""
        return LevelsModel(tuple(Level(lv.groups, min(2 * lv.k, lv.groups.n_groups)) for lv in self.levels))

    def with_sparsities(self, ks: Sequence[int]) -> "LevelsModel":
        return LevelsModel(tuple(Level(lv.groups, int(k)) for lv, k in zip(self.levels, ks)))

    # -- support enumeration --------------------------------------------------

    def count_supports(self, maximal: bool = True) -> int:
        """Number of admissible supports (only those of full size if ``maximal``)."""
        total = 1
        for lv in self.levels:
            G = lv.groups.n_groups
            if maximal:
                total *= math.comb(G, lv.k)
            else:
                total *= sum(math.comb(G, s) for s in range(lv.k + 1))
        return total

    def iter_supports(self, maximal: bool = True, budget: int | None = None) -> Iterator[tuple[tuple[int, ...], ...]]:
        """Admissible supports as per-level tuples of local group indices.

        Order is the lexicographic product of per-level combinations. Raises
        :class:`BudgetExceeded` up front if the count exceeds ``budget``.
        """
        count = self.count_supports(maximal)
        if budget is not None and count > budget:
            raise BudgetExceeded(f"{count} supports exceed the enumeration budget {budget}")
        per_level = []
        for lv in self.levels:
            G = lv.groups.n_groups
            if maximal:
                per_level.append(list(itertools.combinations(range(G), lv.k)))
            else:
                per_level.append([c for s in range(lv.k + 1) for c in itertools.combinations(range(G), s)])
        return itertools.product(*per_level)

    def support_coordinates(self, support: tuple[tuple[int, ...], ...]) -> np.ndarray:
        """Sorted coordinate indices spanned by a per-level support."""
        idx = [i for lv, chosen in zip(self.levels, support) for g in chosen for i in lv.groups.groups[g]]
        return np.array(sorted(idx), dtype=int)

    # -- serialization --------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "ambient_dim": self.ambient_dim,
            "levels": [{"groups": [list(g) for g in lv.groups.groups], "k": lv.k} for lv in self.levels],
        }

    @classmethod
    def from_dict(cls, value, doc: SpecDoc | None = None) -> "LevelsModel":
        doc = doc or SpecDoc.from_value(value)
        return _model_from_doc(doc, value, ())

    @classmethod
    def from_json(cls, text: str, source: str | None = None) -> "LevelsModel":
        doc = SpecDoc.from_text(text, source)
        return _model_from_doc(doc, doc.value, ())

    @classmethod
    def load(cls, path) -> "LevelsModel":
        doc = SpecDoc.from_path(path)
        return _model_from_doc(doc, doc.value, ())


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _model_from_doc(doc: SpecDoc, value, path: tuple) -> LevelsModel:
    if not isinstance(value, dict):
        raise doc.error(path, "model spec must be an object")
    extra = set(value) - {"ambient_dim", "levels"}
    if extra:
        raise doc.error(path + (sorted(extra)[0],), f"unknown key {sorted(extra)[0]!r}")
    for key in ("ambient_dim", "levels"):
        if key not in value:
            raise doc.error(path, f"missing key {key!r}")
    n = value["ambient_dim"]
    if not _is_int(n) or n < 1:
        raise doc.error(path + ("ambient_dim",), "ambient_dim must be a positive integer")
    levels_v = value["levels"]
    if not isinstance(levels_v, list) or not levels_v:
        raise doc.error(path + ("levels",), "levels must be a nonempty array")
    owner: dict[int, tuple] = {}
    levels = []
    for j, lv in enumerate(levels_v):
        lp = path + ("levels", j)
        if not isinstance(lv, dict):
            raise doc.error(lp, "level must be an object")
        extra = set(lv) - {"groups", "k"}
        if extra:
            raise doc.error(lp + (sorted(extra)[0],), f"unknown key {sorted(extra)[0]!r}")
        if "groups" not in lv or "k" not in lv:
            raise doc.error(lp, "level needs 'groups' and 'k'")
        groups_v = lv["groups"]
        if not isinstance(groups_v, list):
            raise doc.error(lp + ("groups",), "groups must be an array")
        groups = []
        for gi, g in enumerate(groups_v):
            gp = lp + ("groups", gi)
            if not isinstance(g, list) or not g:
                raise doc.error(gp, "group must be a nonempty array of indices")
            for ii, i in enumerate(g):
                if not _is_int(i) or not 0 <= i < n:
                    raise doc.error(gp + (ii,), f"index {i!r} is not an integer in [0, {n})")
                if i in owner:
                    raise doc.error(gp + (ii,), f"index {i} already used at {_fmt(owner[i])}")
                owner[i] = gp
            groups.append(tuple(g))
        k = lv["k"]
        if not _is_int(k) or k < 0:
            raise doc.error(lp + ("k",), "k must be a nonnegative integer")
        if k > len(groups):
            raise doc.error(lp + ("k",), f"k={k} exceeds the number of groups ({len(groups)})")
        levels.append(Level(GroupStructure(n, tuple(groups)), k))
    return LevelsModel(tuple(levels))


def _fmt(path: tuple) -> str:
    return "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in path).lstrip(".")


# -- operations on model vectors ----------------------------------------------


def level_supports(x, model: LevelsModel, tol: float | None = None) -> list[set[int]]:
    """Per-level group supports (local group indices)."""
    x = _as_vector(x, model.ambient_dim)
    if tol is None:
        tol = DEFAULT_SUPPORT_TOL * float(np.linalg.norm(x))
    norms = model.group_norms(x)
    offsets = model.group_index[2]
    return [
        {int(g) for g in np.nonzero(norms[offsets[j]:offsets[j + 1]] > tol)[0]}
        for j in range(model.n_levels)
    ]


def is_member(x, model: LevelsModel, tol: float | None = None) -> bool:
    """True iff every level activates at most ``k_j`` groups and nothing lies off-group."""
    x = _as_vector(x, model.ambient_dim)
    if tol is None:
        tol = DEFAULT_SUPPORT_TOL * float(np.linalg.norm(x))
    if np.linalg.norm(x[~model.covered]) > tol:
        return False
    return all(len(s) <= lv.k for s, lv in zip(level_supports(x, model, tol), model.levels))


def top_groups(scores: np.ndarray, model: LevelsModel) -> np.ndarray:
    """Global ids of the ``k_j`` highest-scoring groups of each level.

    Ties go to the smallest group index (stable sort on the negated scores).
    """
    offsets = model.group_index[2]
    keep = []
    for j, lv in enumerate(model.levels):
        if lv.k == 0:
            continue
        s = scores[offsets[j]:offsets[j + 1]]
        order = np.argsort(-s, kind="stable")[:lv.k]
        keep.extend((offsets[j] + np.sort(order)).tolist())
    return np.array(keep, dtype=int)


def groups_mask(group_ids, model: LevelsModel) -> np.ndarray:
    """Coordinate mask of the union of the given global groups."""
    mask = np.zeros(model.ambient_dim, dtype=bool)
    for g in group_ids:
        mask[model.group_members[g]] = True
    return mask


def best_model_approx(x, model: LevelsModel) -> np.ndarray:
    """Euclidean projection onto Σ: keep the ``k_j`` largest groups per level."""
    x = _as_vector(x, model.ambient_dim)
    keep = top_groups(model.group_norms(x), model)
    return np.where(groups_mask(keep, model), x, 0.0)


def _standard_normal(rng: np.random.Generator, size: int) -> np.ndarray:
    return rng.standard_normal(size)


def sample_model(model: LevelsModel, rng_seed=None, magnitude_law: MagnitudeLaw | None = None) -> np.ndarray:
    """Random element of Σ: uniform support per level, i.i.d. coefficients.

    ``rng_seed`` may be an int, a ``SeedSequence`` or a ``Generator``.
    ``magnitude_law(rng, size)`` draws the nonzero coefficients (standard
    normal by default).
    """
    rng = np.random.default_rng(rng_seed)
    law = magnitude_law or _standard_normal
    x = np.zeros(model.ambient_dim)
    for lv in model.levels:
        if lv.k == 0:
            continue
        chosen = rng.choice(lv.groups.n_groups, size=lv.k, replace=False)
        idx = np.array(sorted(i for g in chosen for i in lv.groups.groups[g]), dtype=int)
        x[idx] = law(rng, idx.size)
    return x


def sample_models(model: LevelsModel, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` i.i.d. standard-normal model vectors, as rows of an array."""
    out = np.zeros((count, model.ambient_dim))
    offsets = model.group_index[2]
    for j, lv in enumerate(model.levels):
        if lv.k == 0:
            continue
        G = lv.groups.n_groups
        chosen = np.argsort(rng.random((count, G)), axis=1)[:, :lv.k]
        mask = np.zeros((count, model.ambient_dim), dtype=bool)
        for g in range(G):
            rows = np.any(chosen == g, axis=1)
            mask[np.ix_(rows, model.group_members[offsets[j] + g])] = True
        out[mask] = rng.standard_normal(int(mask.sum()))
    return out


def sample_secant(model: LevelsModel, rng_seed=None) -> np.ndarray:
    """Unit vector ``(x - x')/||x - x'||`` for two independent draws from Σ."""
    rng = np.random.default_rng(rng_seed)
    if all(lv.k == 0 for lv in model.levels):
        raise ValueError("the zero model has no secants")
    while True:
        d = sample_model(model, rng) - sample_model(model, rng)
        norm = np.linalg.norm(d)
        if norm > 0:
            return d / norm


def sample_secants(model: LevelsModel, count: int, rng: np.random.Generator) -> np.ndarray:
    """Batch of ``count`` normalized secants (rows)."""
    if all(lv.k == 0 for lv in model.levels):
        raise ValueError("the zero model has no secants")
    d = sample_models(model, count, rng) - sample_models(model, count, rng)
    norms = np.linalg.norm(d, axis=1)
    bad = norms == 0
    while np.any(bad):
        d[bad] = sample_models(model, int(bad.sum()), rng) - sample_models(model, int(bad.sum()), rng)
        norms = np.linalg.norm(d, axis=1)
        bad = norms == 0
    return d / norms[:, None]
