"""Decoders: constrained convex minimization and the ideal (model-indicator) decoder."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .measurements import MeasureOp
from .models import LevelsModel
from .regularizers import Regularizer, dual_norm, eval_f, prox_f


@dataclass
class DecodeOptions:
    tol: float = 1e-9
    max_iter: int = 200_000
    check_every: int = 10
    feas_tol: float = 1e-6
    adaptive: bool = True
    whiten: bool = True
    power_tol: float = 1e-6
    seed: int = 0


@dataclass
class DecodeResult:
    x_star: np.ndarray
    objective: float
    residual_norm: float
    iterations: int
    converged: bool
    certificate: float
    status: str = "ok"
    support: tuple | None = None
    trace: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "x_star": [float(v) + 0.0 for v in self.x_star],
            "objective": float(self.objective),
            "residual_norm": float(self.residual_norm),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "certificate": float(self.certificate),
            "status": self.status,
            "trace_length": len(self.trace),
        }


def power_iteration(A: MeasureOp, tol: float = 1e-6, max_iter: int = 10_000, seed=0) -> float:
    """Estimate of ``||A||`` by power iteration on ``A^T A`` (relative tolerance ``tol``)."""
    if A.matrix.size == 0:
        return 0.0
    x = np.random.default_rng(seed).standard_normal(A.input_dim)
    x /= np.linalg.norm(x)
    est = 0.0
    for _ in range(max_iter):
        w = A.adjoint(A.apply(x))
        nw = float(np.linalg.norm(w))
        if nw == 0:
            return 0.0
        x = w / nw
        if abs(nw - est) <= tol * nw:
            return math.sqrt(nw)
        est = nw
    return math.sqrt(est)


def _project_ball(w: np.ndarray, center: np.ndarray, radius: float) -> np.ndarray:
    d = w - center
    nd = float(np.linalg.norm(d))
    if nd <= radius:
        return w
    return center + d * (radius / nd)


def decode_convex(A: MeasureOp, y, eps: float, f: Regularizer, opts: DecodeOptions | None = None,
                  x0=None) -> DecodeResult:
    """``argmin f(z)`` subject to ``||A z - y|| <= eps``.

    Primal-dual splitting (Chambolle-Pock) alternating the prox of ``f`` with
    the projection onto the ``eps``-ball around ``y``. Steps satisfy
    ``tau sigma ||A||^2 < 1`` with ``||A||`` from power iteration; with
    ``opts.adaptive`` their ratio is rebalanced from the residuals. The
    certificate is the duality gap at the last iterate after scaling the dual
    variable into the feasible set.

    For ``eps == 0`` and full row rank, ``opts.whiten`` replaces ``Az = y`` by
    the equivalent ``W A z = W y`` with ``W = (A A^T)^{-1/2}``; the feasible
    set is unchanged and the iteration is much better conditioned. Reported
    residuals always refer to the original ``A``.
    """
    opts = opts or DecodeOptions()
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if f.kind not in ("l1", "group-levels"):
        raise ValueError("decode_convex supports l1 and group-levels regularizers")
    y = np.asarray(y, dtype=float)
    if y.shape != (A.m,):
        raise ValueError(f"expected {A.m} measurements, got shape {y.shape}")
    n = A.input_dim
    if n != f.model.ambient_dim:
        raise ValueError("operator and regularizer dimensions differ")

    if A.m == 0 or float(np.linalg.norm(y)) <= eps:
        # 0 is feasible and minimizes any norm
        x = np.zeros(n)
        res = float(np.linalg.norm(A.apply(x) - y)) if A.m else 0.0
        return DecodeResult(x, 0.0, res, 0, True, 0.0, status="zero-feasible")

    A_orig, y_orig = A, y
    if eps == 0 and opts.whiten and A.m <= n:
        U, s, _ = np.linalg.svd(A.matrix, full_matrices=False)
        if s[-1] > 1e-10 * s[0]:
            W = (U / s) @ U.T
            A = MeasureOp("explicit-matrix", W @ A.matrix)
            y = W @ y

    L = power_iteration(A, opts.power_tol, seed=opts.seed) * (1 + 10 * opts.power_tol)
    tau = sigma = 0.99 / L
    M = A.matrix
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    u = np.zeros(A.m)
    Ax = M @ x
    ATu = np.zeros(n)
    ynorm = float(np.linalg.norm(y))
    feas_max = eps * (1 + opts.feas_tol) if eps > 0 else opts.feas_tol * ynorm
    alpha, eta, balance = 0.5, 0.95, 1.5
    trace = []
    converged = False
    it = 0
    for it in range(1, opts.max_iter + 1):
        x_new = prox_f(f, x - tau * ATu, tau)
        Ax_new = M @ x_new
        v = u + sigma * (2 * Ax_new - Ax)
        u_new = v - sigma * _project_ball(v / sigma, y, eps)
        ATu_new = u_new @ M
        if it % opts.check_every == 0 or it == opts.max_iter:
            p = (x - x_new) / tau - (ATu - ATu_new)
            d = (u - u_new) / sigma - (Ax - Ax_new)
            pn, dn = float(np.linalg.norm(p)), float(np.linalg.norm(d))
            feas = float(np.linalg.norm(Ax_new - y))
            trace.append((it, pn, dn, feas))
            scale_p = 1.0 + float(np.linalg.norm(ATu_new))
            scale_d = 1.0 + ynorm
            if (pn <= opts.tol * scale_p and dn <= opts.tol * scale_d
                    and feas <= feas_max):
                x, u, Ax, ATu = x_new, u_new, Ax_new, ATu_new
                converged = True
                break
            if opts.adaptive:
                if pn > balance * dn * scale_p / scale_d:
                    tau, sigma = tau / (1 - alpha), sigma * (1 - alpha)
                    alpha *= eta
                elif dn * scale_p / scale_d > balance * pn:
                    tau, sigma = tau * (1 - alpha), sigma / (1 - alpha)
                    alpha *= eta
        x, u, Ax, ATu = x_new, u_new, Ax_new, ATu_new

    obj = eval_f(f, x)
    residual = float(np.linalg.norm(A_orig.apply(x) - y_orig))
    gap = _duality_gap(f, obj, u, ATu, y, eps)
    return DecodeResult(x, obj, residual, it, converged, gap,
                        status="ok" if converged else "max-iter", trace=trace)


def _duality_gap(f: Regularizer, obj: float, u: np.ndarray, ATu: np.ndarray, y: np.ndarray, eps: float) -> float:
    dn = dual_norm(f, -ATu)
    if not math.isfinite(dn):
        return math.inf
    s = max(1.0, dn)
    u = u / s
    dual = -float(y @ u) - eps * float(np.linalg.norm(u))
    return obj - dual


def decode_ideal_small(A: MeasureOp, y, eps: float, model: LevelsModel, budget: int = 10**6,
                       feas_rtol: float = 1e-9) -> DecodeResult:
    """Minimize the indicator of Σ under ``||A z - y|| <= eps`` by support enumeration.

    If ``0`` is feasible it is returned. Otherwise every maximal admissible
    support gets a least-squares fit; the smallest residual wins (ties: first
    support in lexicographic order) and is reported infeasible if it exceeds
    ``eps`` (plus ``feas_rtol * ||y||``).
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (A.m,):
        raise ValueError(f"expected {A.m} measurements, got shape {y.shape}")
    n = A.input_dim
    ynorm = float(np.linalg.norm(y))
    slack = feas_rtol * ynorm
    if ynorm <= eps + slack:
        return DecodeResult(np.zeros(n), 0.0, ynorm, 0, True, 0.0, status="zero-feasible", support=())
    supports = list(model.iter_supports(maximal=True, budget=budget))
    coords = [model.support_coordinates(s) for s in supports]
    by_size: dict[int, list[int]] = {}
    for i, c in enumerate(coords):
        by_size.setdefault(len(c), []).append(i)
    residuals = np.full(len(supports), math.inf)
    fits: dict[int, np.ndarray] = {}
    for size, ids in by_size.items():
        idx = np.stack([coords[i] for i in ids])
        AS = A.matrix[:, idx].transpose(1, 0, 2)  # (batch, m, size)
        coef = np.linalg.pinv(AS) @ y
        res = np.linalg.norm(np.einsum("bms,bs->bm", AS, coef) - y, axis=1)
        for j, i in enumerate(ids):
            residuals[i] = res[j]
            fits[i] = coef[j]
    order = np.argsort(residuals, kind="stable")
    i = int(order[0])
    x = np.zeros(n)
    x[coords[i]] = fits[i]
    best = residuals[i]
    feasible = best <= eps + slack
    return DecodeResult(x, 0.0 if feasible else math.inf, float(best), len(supports), feasible, 0.0,
                        status="ok" if feasible else "infeasible", support=supports[i])
