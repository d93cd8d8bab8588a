import itertools

import cvxpy as cp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from structcs.decoders import DecodeOptions, decode_convex, decode_ideal_small, power_iteration
from structcs.measurements import explicit, gaussian, normalize_columns, rip_exact
from structcs.models import LevelsModel, sample_model
from structcs.regularizers import Regularizer, eval_f, stability_constants


def lp_l1(A, y):
    """min ||x||_1 s.t. Ax = y as an LP over (x+, x-)."""
    m, n = A.shape
    res = linprog(np.ones(2 * n), A_eq=np.hstack([A, -A]), b_eq=y, bounds=(0, None), method="highs")
    assert res.status == 0
    return res.x[:n] - res.x[n:], res.fun


def socp(A, y, eps, f):
    """Same problem through cvxpy's conic solver."""
    x = cp.Variable(A.shape[1])
    terms = [w * cp.norm(x[list(g)], 2) for g, w in zip(f.model.group_members, f.group_weights)] \
        if f.kind == "group-levels" else [cp.norm1(x)]
    prob = cp.Problem(cp.Minimize(sum(terms)), [cp.norm(A @ x - y, 2) <= eps])
    prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-10, tol_gap_rel=1e-10, tol_feas=1e-10)
    return x.value, prob.value


def brute_ideal(A, y, model):
    """Exhaustive least squares over every admissible support (plain loops)."""
    best = (np.inf, None)
    for support in model.iter_supports(maximal=True):
        cols = model.support_coordinates(support)
        coef, *_ = np.linalg.lstsq(A[:, cols], y, rcond=None)
        r = np.linalg.norm(A[:, cols] @ coef - y)
        if r < best[0] - 1e-12:
            x = np.zeros(A.shape[1])
            x[cols] = coef
            best = (r, x)
    return best


def test_power_iteration():
    A = gaussian(6, 9, 3)
    assert power_iteration(A, 1e-10) == pytest.approx(np.linalg.norm(A.matrix, 2), rel=1e-6)
    assert power_iteration(explicit(np.zeros((2, 3)))) == 0.0


def test_identity_recovers_y():
    model = LevelsModel.sparse(5, 2)
    y = np.array([1.0, -2.0, 0.0, 0.5, 3.0])
    r = decode_convex(explicit(np.eye(5)), y, 0.0, Regularizer.l1(model))
    assert r.converged
    assert np.allclose(r.x_star, y, atol=1e-8)


def test_large_eps_gives_zero():
    model = LevelsModel.sparse(6, 2)
    A = gaussian(4, 6, 0)
    y = np.ones(4)
    r = decode_convex(A, y, 2.0, Regularizer.adapted(model))
    assert r.status == "zero-feasible" and not r.x_star.any()
    assert decode_ideal_small(A, y, 2.0, model).status == "zero-feasible"


def test_bad_arguments():
    model = LevelsModel.sparse(6, 2)
    A = gaussian(4, 6, 0)
    with pytest.raises(ValueError):
        decode_convex(A, np.ones(4), -1.0, Regularizer.l1(model))
    with pytest.raises(ValueError):
        decode_convex(A, np.ones(3), 0.0, Regularizer.l1(model))
    with pytest.raises(ValueError):
        decode_convex(A, np.ones(4), 0.0, Regularizer.sigma_norm(model))


def test_nonconvergence_is_flagged():
    model = LevelsModel.sparse(14, 3)
    A = gaussian(6, 14, 1)
    y = A.apply(sample_model(model, 2))
    r = decode_convex(A, y, 0.0, Regularizer.l1(model), DecodeOptions(max_iter=5, whiten=False))
    assert not r.converged and r.status == "max-iter" and r.iterations == 5


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_l1_matches_lp(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(6, 15))
    m = int(rng.integers(3, n))
    model = LevelsModel.sparse(n, 2)
    A = gaussian(m, n, seed)
    y = rng.standard_normal(m)
    r = decode_convex(A, y, 0.0, Regularizer.l1(model))
    _, ref = lp_l1(A.matrix, y)
    assert r.converged
    assert abs(r.objective - ref) <= 1e-6 * (1 + ref)
    assert r.residual_norm <= 1e-6 * np.linalg.norm(y)
    assert r.certificate >= -1e-8 * (1 + ref)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10**6), rel_eps=st.floats(0.01, 0.8))
@pytest.mark.parametrize("kind", ["l1", "adapted", "blocks"])
def test_noisy_matches_conic_oracle(kind, seed, rel_eps):
    rng = np.random.default_rng(seed)
    if kind == "blocks":
        model = LevelsModel.block_sparse([8, 6], 2, [1, 2])
    else:
        model = LevelsModel.sparse_in_levels([6, 6], [1, 2])
    f = Regularizer.l1(model) if kind == "l1" else Regularizer.adapted(model)
    n = model.ambient_dim
    A = gaussian(int(rng.integers(4, n)), n, seed)
    y = rng.standard_normal(A.m)
    eps = rel_eps * np.linalg.norm(y)
    r = decode_convex(A, y, eps, f)
    _, ref = socp(A.matrix, y, eps, f)
    assert r.converged
    assert r.residual_norm <= eps * (1 + 1e-6)
    assert abs(r.objective - ref) <= 1e-6 * (1 + ref)


def test_sign_support_recovery_n12():
    model = LevelsModel.sparse(12, 1)
    f = Regularizer.l1(model)
    for seed in itertools.count():
        A = normalize_columns(gaussian(9, 12, seed))
        if rip_exact(A, model).delta_hat < 1 / np.sqrt(2):
            break
    for i, s in itertools.product(range(12), (1.0, -1.0)):
        x = np.zeros(12)
        x[i] = s
        r = decode_convex(A, A.apply(x), 0.0, f)
        assert r.converged
        assert np.linalg.norm(r.x_star - x) <= 1e-6
        xl, _ = lp_l1(A.matrix, A.apply(x))
        assert np.allclose(xl, x, atol=1e-7)


def test_ideal_matches_exhaustive_search():
    model = LevelsModel.sparse(10, 2)
    for seed in range(50):
        rng = np.random.default_rng(seed)
        A = gaussian(7, 10, seed)
        if seed % 2:
            y = A.apply(sample_model(model, rng))
        else:
            y = rng.standard_normal(7)
        r = decode_ideal_small(A, y, 0.0 if seed % 2 else 0.1, model)
        res, x = brute_ideal(A.matrix, y, model)
        assert r.residual_norm == pytest.approx(res, abs=1e-10)
        assert np.allclose(r.x_star, x, atol=1e-8)
        if seed % 2:
            assert r.converged


def test_ideal_exact_on_model():
    model = LevelsModel.sparse_in_levels([5, 5], [1, 2])
    A = gaussian(8, 10, 4)
    # injective on Σ − Σ: every doubled-support submatrix has full column rank
    doubled = model.doubled()
    for support in doubled.iter_supports(maximal=True):
        cols = doubled.support_coordinates(support)
        assert np.linalg.svd(A.matrix[:, cols], compute_uv=False)[-1] > 1e-6
    for seed in range(10):
        x = sample_model(model, seed)
        r = decode_ideal_small(A, A.apply(x), 0.0, model)
        assert np.allclose(r.x_star, x, atol=1e-8)


def test_ideal_infeasible_status():
    model = LevelsModel.sparse(6, 1)
    A = explicit(np.eye(6))
    r = decode_ideal_small(A, np.ones(6), 0.5, model)
    assert r.status == "infeasible" and not r.converged


def test_levels_error_bound_per_trial():
    model = LevelsModel.sparse_in_levels([8, 6], [1, 2])
    f = Regularizer.adapted(model)
    rng = np.random.default_rng(11)
    Q, _ = np.linalg.qr(rng.standard_normal((14, 14)))
    A = explicit(Q + 0.02 * rng.standard_normal((14, 14)))
    delta = rip_exact(A, model).delta_hat
    assert delta < 0.5
    C = stability_constants(2, model.sparsities, delta).C_sigma
    for t in range(20):
        rng = np.random.default_rng(t)
        x = sample_model(model, rng)
        e = rng.standard_normal(14)
        e *= rng.uniform(0.001, 0.1) / np.linalg.norm(e)
        eps = np.linalg.norm(e) * rng.uniform(1.0, 2.0)
        r = decode_convex(A, A.apply(x) + e, eps, f)
        assert r.converged
        assert np.linalg.norm(r.x_star - x) <= C * (np.linalg.norm(e) + eps)


def test_result_dict():
    model = LevelsModel.sparse(5, 1)
    r = decode_convex(explicit(np.eye(5)), np.arange(5.0), 0.0, Regularizer.l1(model))
    d = r.to_dict()
    assert d["converged"] and d["trace_length"] == len(r.trace)
    assert d["objective"] == pytest.approx(eval_f(Regularizer.l1(model), np.arange(5.0)))
