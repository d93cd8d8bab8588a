import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from structcs.jsonspec import SpecError
from structcs.measurements import (
    MeasureOp,
    bernoulli,
    compose,
    concentration_probe,
    explicit,
    extremal_secant_sampler,
    gaussian,
    isotropy_check,
    normalize_columns,
    operator_from_spec,
    random_operator,
    rip_exact,
    rip_sampled,
    sphere_rows,
    sufficient_m_general,
    sufficient_m_levels,
)
from structcs.models import BudgetExceeded, LevelsModel
from structcs.secants import ModelSecants, SubspaceBasis, UnitSphere


def brute_force_rip(A, n, max_support):
    """RIP constant over every coordinate support of size 1..max_support via SVDs."""
    worst = 0.0
    for size in range(1, max_support + 1):
        for S in itertools.combinations(range(n), size):
            s = np.linalg.svd(A[:, list(S)], compute_uv=False)
            worst = max(worst, s[0] ** 2 - 1.0, 1.0 - s[-1] ** 2)
    return worst


# -- operators -----------------------------------------------------------------


def test_apply_zero_and_identity():
    A = gaussian(5, 7, 0)
    assert np.array_equal(A.apply(np.zeros(7)), np.zeros(5))
    x = np.arange(4.0)
    assert np.array_equal(explicit(np.eye(4)).apply(x), x)


def test_linearity_and_adjoint_identity():
    rng = np.random.default_rng(1)
    A = gaussian(13, 21, 3)
    x, y = rng.standard_normal((2, 21))
    assert np.allclose(A.apply(2.5 * x - 0.5 * y), 2.5 * A.apply(x) - 0.5 * A.apply(y), atol=1e-10)
    errs = []
    for _ in range(100):
        x = rng.standard_normal(21)
        u = rng.standard_normal(13)
        lhs, rhs = A.apply(x) @ u, x @ A.adjoint(u)
        errs.append(abs(lhs - rhs) / max(abs(lhs), 1e-300))
    assert max(errs) < 1e-10


def test_dimension_mismatch():
    A = gaussian(3, 4, 0)
    with pytest.raises(ValueError):
        A.apply(np.zeros(5))
    with pytest.raises(ValueError):
        A.adjoint(np.zeros(4))


@pytest.mark.parametrize("factory", [gaussian, bernoulli, sphere_rows])
def test_determinism(factory):
    assert np.array_equal(factory(6, 9, 42).matrix, factory(6, 9, 42).matrix)
    assert not np.array_equal(factory(6, 9, 42).matrix, factory(6, 9, 43).matrix)


def test_ensemble_entry_laws():
    B = bernoulli(16, 50, 0).matrix
    assert set(np.unique(B)) == {-0.25, 0.25}
    S = sphere_rows(10, 40, 0).matrix
    assert np.allclose(np.linalg.norm(S, axis=1), math.sqrt(40 / 10))
    G = gaussian(400, 400, 0).matrix
    assert abs(G.var() * 400 - 1.0) < 0.02


def test_composed_operator():
    H = SubspaceBasis(np.linalg.qr(np.random.default_rng(0).standard_normal((10, 3)))[0].T)
    M = gaussian(4, 3, 1)
    A = compose(M, H)
    x = np.random.default_rng(2).standard_normal(10)
    assert np.allclose(A.apply(x), M.apply(H.coordinates(x)))
    assert A.kind == "composed" and A.input_dim == 10
    with pytest.raises(ValueError):
        compose(gaussian(4, 5, 0), H)


def test_normalize_columns():
    A = normalize_columns(gaussian(5, 8, 0))
    assert np.allclose(np.linalg.norm(A.matrix, axis=0), 1.0)


# -- RIP ----------------------------------------------------------------------


def test_rip_sampled_trivial_scalings():
    model = LevelsModel.sparse(6, 2)
    sampler = ModelSecants(model)
    assert rip_sampled(explicit(np.eye(6)), sampler, 500, seed=0).delta_hat < 1e-12
    assert rip_sampled(explicit(2 * np.eye(6)), sampler, 500, seed=0).delta_hat == pytest.approx(3.0)


def test_rip_exact_diag_example():
    model = LevelsModel.sparse(2, 1)
    report = rip_exact(explicit(np.diag([1.0, 0.5])), model)
    assert report.delta_hat == pytest.approx(0.75, abs=1e-14)
    assert report.method == "exact-enumeration"
    vectors = extremal_secant_sampler(explicit(np.diag([1.0, 0.5])), LevelsModel.sparse(2, 1)).vectors
    # k=1 doubled is the whole plane: extremes are e1 (top) and e2 (bottom)
    assert np.allclose(np.abs(vectors), [[1, 0], [0, 1]])


def test_rip_exact_orthonormal_columns_is_zero():
    Q = np.linalg.qr(np.random.default_rng(0).standard_normal((15, 9)))[0]
    assert rip_exact(explicit(Q), LevelsModel.sparse_in_levels([4, 5], [1, 2])).delta_hat < 1e-12


def test_rip_exact_matches_brute_force_small():
    A = gaussian(8, 12, 5)
    ref = brute_force_rip(A.matrix, 12, 2)
    assert rip_exact(A, LevelsModel.sparse(12, 1)).delta_hat == pytest.approx(ref, abs=1e-12)


def test_rip_exact_block_model_matches_brute_force():
    # groups of size 2, k=1: secants live on <= 2 groups, i.e. <= 4 coordinates
    model = LevelsModel.block_sparse([8], 2, [1])
    A = gaussian(6, 8, 9).matrix
    worst = 0.0
    for g1, g2 in itertools.combinations(range(4), 2):
        idx = [2 * g1, 2 * g1 + 1, 2 * g2, 2 * g2 + 1]
        s = np.linalg.svd(A[:, idx], compute_uv=False)
        worst = max(worst, s[0] ** 2 - 1, 1 - s[-1] ** 2)
    assert rip_exact(explicit(A), model).delta_hat == pytest.approx(worst, abs=1e-12)


def test_rip_exact_budget_refusal():
    with pytest.raises(BudgetExceeded):
        rip_exact(gaussian(5, 30, 0), LevelsModel.sparse(30, 3), budget=1000)
    with pytest.raises(BudgetExceeded):
        extremal_secant_sampler(gaussian(5, 30, 0), LevelsModel.sparse(30, 3), budget=1000)


def test_sampled_below_exact_and_extremal_equal():
    model = LevelsModel.sparse(20, 2)
    A = gaussian(60, 20, 0)
    exact = rip_exact(A, model).delta_hat
    sampled = rip_sampled(A, ModelSecants(model), 5000, seed=1).delta_hat
    assert sampled <= exact + 1e-10
    ext = rip_sampled(A, extremal_secant_sampler(A, model)).delta_hat
    assert abs(ext - exact) <= 1e-10


@pytest.mark.parametrize("m,seed", [(10, 0), (20, 2), (40, 1)])
def test_extremal_equals_exact_across_chunks(m, seed):
    model = LevelsModel.sparse(20, 2)
    A = gaussian(m, 20, seed)
    sampler = extremal_secant_sampler(A, model)
    exact = rip_exact(A, model).delta_hat
    for chunk in (7, 4096):
        assert abs(rip_sampled(A, sampler, chunk=chunk).delta_hat - exact) <= 1e-10


def test_extremal_equals_exact_levels():
    model = LevelsModel.sparse(10, 2)
    A = gaussian(7, 10, 4)
    assert abs(rip_sampled(A, extremal_secant_sampler(A, model)).delta_hat
               - rip_exact(A, model).delta_hat) <= 1e-10


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_rip_exact_invariant_under_output_rotation(seed):
    rng = np.random.default_rng(seed)
    model = LevelsModel.sparse_in_levels([5, 4], [1, 1])
    A = gaussian(7, 9, seed)
    Q = np.linalg.qr(rng.standard_normal((7, 7)))[0]
    d1 = rip_exact(A, model).delta_hat
    d2 = rip_exact(explicit(Q @ A.matrix), model).delta_hat
    assert d1 == pytest.approx(d2, abs=1e-10)


def test_sampled_rip_median_shrinks_with_m():
    model = LevelsModel.sparse(16, 2)
    medians = []
    for m in (8, 16, 32, 64):
        vals = [rip_sampled(gaussian(m, 16, s), ModelSecants(model), 400, seed=s).delta_hat for s in range(20)]
        medians.append((np.median(vals), np.std(vals) / math.sqrt(20)))
    for (a, sa), (b, sb) in zip(medians, medians[1:]):
        assert b <= a + 2 * math.hypot(sa, sb)


# -- isotropy / concentration -----------------------------------------------------


def test_isotropy_zero_vector():
    res = isotropy_check("dense-gaussian", np.zeros(5), 200, seed=0, m=10)
    assert res.mean == 0.0


def test_isotropy_requires_trials():
    with pytest.raises(ValueError):
        isotropy_check("dense-gaussian", np.ones(3), 99)


@pytest.mark.parametrize("kind", ["dense-gaussian", "dense-bernoulli", "sphere-rows"])
def test_isotropy_unit_vector(kind):
    x = np.random.default_rng(0).standard_normal(12)
    x /= np.linalg.norm(x)
    res = isotropy_check(kind, x, 100_000, seed=1, m=25)
    assert 0.98 <= res.mean <= 1.02
    assert res.within(3.0)


def test_isotropy_gaussian_variance():
    # for the Gaussian ensemble ||Mx||^2 ~ chi2_m / m, variance 2/m
    x = np.zeros(6)
    x[0] = 1.0
    res = isotropy_check("dense-gaussian", x, 50_000, seed=2, m=25)
    var = res.std_error ** 2 * res.trials
    assert var == pytest.approx(2 / 25, rel=0.05)


def test_isotropy_independent_of_chunking():
    x = np.eye(4)[:2]
    a = isotropy_check("dense-bernoulli", x, 3000, seed=5, m=7, chunk=1000)
    b = isotropy_check("dense-bernoulli", x, 3000, seed=5, m=7, chunk=1000)
    assert np.array_equal(a.mean, b.mean)


def test_concentration_equal_vectors_have_no_tail():
    y = np.eye(5)[0]
    table = concentration_probe("dense-gaussian", y, y, [0.1, 0.2], 500, seed=0, m=10)
    assert np.all(table.tail_prob == 0)


def test_concentration_tail_monotone():
    y = np.eye(8)[0]
    table = concentration_probe("dense-gaussian", y, np.zeros(8), np.linspace(0.05, 1.0, 12), 4000, seed=0, m=20)
    assert np.all(np.diff(table.tail_prob) <= 0)


def test_concentration_antipodal_pair_is_degenerate():
    # ||M(-y)||^2 = ||My||^2 for every draw, so the increment vanishes
    y = np.eye(6)[0]
    table = concentration_probe("dense-gaussian", y, -y, [0.01, 0.1], 2000, seed=0, m=10)
    assert np.all(table.tail_events == 0)
    assert math.isnan(table.c1)


def test_concentration_fit_self_consistent():
    y, z = np.eye(10)[:2]
    lambdas = np.linspace(0.05, 0.8, 16)
    table = concentration_probe("dense-gaussian", y, z, lambdas, 20_000, seed=3, m=50)
    assert table.c1 > 0
    fit = table.in_fit
    assert np.count_nonzero(fit) >= 3
    bound = 2 * np.exp(-table.c1 * table.m * lambdas[fit] ** 2 * (1 - 0.3))
    assert np.all(table.tail_prob[fit] <= bound)


# -- measurement counts -----------------------------------------------------------


def test_sufficient_m_general_example():
    m = sufficient_m_general(s=2, alpha_S=math.exp(-1), xi=6 * math.exp(-2), delta0=0.5, c1=1, c2=1, C_abs=1)
    assert m == 8


def test_sufficient_m_general_scaling():
    base = dict(s=3, alpha_S=0.1, xi=0.01, c1=0.5, c2=0.2, C_abs=1.0)
    m1 = sufficient_m_general(delta0=0.4, **base)
    m2 = sufficient_m_general(delta0=0.2, **base)
    raw = 3 * math.log(10) / 0.2
    assert m1 == math.ceil(raw / 0.16)
    assert m2 == math.ceil(raw / 0.04)


def test_sufficient_m_general_max_structure():
    kw = dict(s=2, alpha_S=0.1, delta0=0.5, c1=1, c2=1)
    # s log(1/alpha) = 4.605 dominates until log(6/xi) exceeds it
    assert sufficient_m_general(xi=0.5, **kw) == sufficient_m_general(xi=0.1, **kw)
    assert sufficient_m_general(xi=1e-6, **kw) > sufficient_m_general(xi=0.1, **kw)


@pytest.mark.parametrize("bad", [dict(delta0=1.0), dict(xi=0.0), dict(alpha_S=0.5), dict(s=0)])
def test_sufficient_m_general_rejects(bad):
    kw = dict(s=2, alpha_S=0.1, xi=0.1, delta0=0.5, c1=1, c2=1)
    kw.update(bad)
    with pytest.raises(ValueError):
        sufficient_m_general(**kw)


def test_sufficient_m_levels_examples():
    model = LevelsModel.sparse(64, 4)
    assert sufficient_m_levels(model) == math.ceil(4 + 4 * math.log(48 * math.e)) == 24
    model1 = LevelsModel.sparse(10, 1)
    assert sufficient_m_levels(model1) == math.ceil(1 + math.log(30 * math.e))
    two = LevelsModel.sparse_in_levels([64, 64], [4, 4])
    raw = 4 + 4 * math.log(48 * math.e)
    assert sufficient_m_levels(two, C_abs=1) == math.ceil(2 * 2 * raw)


def test_sufficient_m_levels_skips_empty_level():
    model = LevelsModel.sparse_in_levels([64, 10], [4, 0])
    assert sufficient_m_levels(model) == math.ceil(2 * (4 + 4 * math.log(48 * math.e)))


# -- operator spec ------------------------------------------------------------------


def test_operator_from_spec_random_and_identity():
    A = operator_from_spec({"kind": "dense-gaussian", "m": 5, "seed": 3}, 8)
    assert np.array_equal(A.matrix, gaussian(5, 8, 3).matrix)
    I = operator_from_spec({"kind": "explicit-matrix", "matrix": "identity"}, 4)
    assert np.array_equal(I.matrix, np.eye(4))


def test_operator_from_spec_composed(tmp_path):
    basis = np.eye(6)[:2]
    (tmp_path / "H.json").write_text(json.dumps({"basis": basis.tolist()}))
    A = operator_from_spec({"kind": "dense-gaussian", "m": 3, "seed": 1, "compose_with_H": "H.json"}, 6,
                           base_dir=tmp_path)
    assert A.kind == "composed" and A.matrix.shape == (3, 6)
    assert np.array_equal(A.matrix, gaussian(3, 2, 1).matrix @ basis)


def test_operator_from_spec_errors():
    with pytest.raises(SpecError):
        operator_from_spec({"kind": "fourier", "m": 3}, 4)
    with pytest.raises(SpecError):
        operator_from_spec({"kind": "dense-gaussian", "m": -1}, 4)
    with pytest.raises(SpecError):
        operator_from_spec({"kind": "explicit-matrix", "matrix": [[1, 2]]}, 4)
