import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kkm.approx import (
    kpca_features,
    nystrom_factors,
    nystrom_from_kernel,
    pinv_root_features,
    power_iterations,
    power_method_features,
    rank_restricted_approx,
    rank_restricted_features,
    reduce_dimension,
    rff_features,
    trace_error_ratio,
)
from kkm.evaluation import synthetic_spsd
from kkm.kernel import DataMatrix, KernelSpec, kernel_matrix
from kkm.sketch import KINDS, SketchPlan, build_sketch, leverage_plan, selection_sketch

from conftest import power_spsd, random_spsd


def _best_rank(k, s):
    lam, v = np.linalg.eigh(k)
    order = np.argsort(lam)[::-1][:s]
    return (v[:, order] * lam[order]) @ v[:, order].T


def _sketch(kind, k, c, seed):
    if kind == "leverage":
        return build_sketch(leverage_plan(np.linalg.eigh(k)[1][:, ::-1][:, :3], c, seed))
    return build_sketch(SketchPlan(kind, k.shape[0], c, seed))


def test_full_sketch_factors(rng):
    data = DataMatrix(rng.standard_normal((12, 2)))
    spec = KernelSpec(1.0)
    k = kernel_matrix(data, spec)
    perm = rng.permutation(12)
    f = nystrom_factors(data, spec, selection_sketch(perm, 12))
    np.testing.assert_array_equal(f.C, k[:, perm])
    np.testing.assert_array_equal(f.W, k[np.ix_(perm, perm)])


def test_single_point_factors():
    f = nystrom_factors(DataMatrix([[3.0, 1.0]]), KernelSpec(2.0), SketchPlan("uniform", 1, 1))
    np.testing.assert_array_equal(f.C, [[1.0]])
    np.testing.assert_array_equal(f.W, [[1.0]])


@pytest.mark.parametrize("kind", KINDS)
def test_factors_match_dense_product(kind, rng):
    data = DataMatrix(rng.standard_normal((50, 3)))
    spec = KernelSpec(1.5)
    k = kernel_matrix(data, spec)
    op = _sketch(kind, k, 10, seed=4)
    f = nystrom_factors(data, spec, op)
    p = op.to_dense()
    np.testing.assert_allclose(f.C, k @ p, atol=1e-10)
    np.testing.assert_allclose(f.W, p.T @ k @ p, atol=1e-10)
    np.testing.assert_allclose(f.W, f.W.T, atol=1e-12)


def test_sampling_core_is_rescaled_principal_submatrix(rng):
    data = DataMatrix(rng.standard_normal((20, 2)))
    spec = KernelSpec(1.0)
    op = build_sketch(SketchPlan("uniform", 20, 6, seed=1))
    f = nystrom_factors(data, spec, op)
    sub = kernel_matrix(data, spec)[np.ix_(op.indices, op.indices)]
    np.testing.assert_allclose(f.W, op.scales[:, None] * sub * op.scales[None, :], rtol=1e-14)


def test_projection_sketch_respects_cap(rng):
    data = DataMatrix(rng.standard_normal((30, 2)))
    with pytest.raises(MemoryError):
        nystrom_factors(data, KernelSpec(1.0), SketchPlan("gaussian", 30, 5), max_dense=20)
    nystrom_factors(data, KernelSpec(1.0), SketchPlan("uniform", 30, 5), max_dense=20)
    with pytest.raises(ValueError):
        nystrom_factors(data, KernelSpec(1.0), SketchPlan("uniform", 31, 5))


@pytest.mark.parametrize("r", [1, 3, 6])
def test_features_exact_at_full_sketch(r):
    k = random_spsd(10, r, seed=r)
    f = nystrom_from_kernel(k, selection_sketch(np.arange(10), 10))
    b = rank_restricted_features(f, s=r, ell=r).B
    assert np.linalg.norm(b @ b.T - k) <= 1e-7 * np.linalg.norm(k)


def test_features_hand_example():
    k = np.diag([4.0, 1.0, 0.0])
    f = nystrom_from_kernel(k, selection_sketch([0, 1], 3))
    b = rank_restricted_features(f, s=1, ell=2).B
    np.testing.assert_allclose(b @ b.T, np.diag([4.0, 0.0, 0.0]), atol=1e-12)


def test_features_default_ell_and_validation():
    k = power_spsd(30)
    f = nystrom_from_kernel(k, build_sketch(SketchPlan("gaussian", 30, 9, seed=0)))
    feats = rank_restricted_features(f, s=3)
    assert feats.params["ell"] == math.ceil(9 / 2)
    assert feats.B.shape == (30, 3)
    for s, ell in [(0, 4), (5, 4), (3, 10)]:
        with pytest.raises(ValueError):
            rank_restricted_features(f, s=s, ell=ell)


def test_features_ell_reduction_warns_or_raises():
    k = random_spsd(12, 2, seed=0)
    f = nystrom_from_kernel(k, selection_sketch(np.arange(6), 12))
    with pytest.warns(RuntimeWarning):
        feats = rank_restricted_features(f, s=2, ell=4)
    assert feats.params["ell_reduced"] and feats.params["ell_used"] == 2
    assert np.linalg.norm(feats.B @ feats.B.T - k) <= 1e-7 * np.linalg.norm(k)
    with pytest.raises(ValueError):
        rank_restricted_features(f, s=2, ell=4, strict=True)


def test_features_columns_ordered():
    k = power_spsd(40, seed=2)
    f = nystrom_from_kernel(k, build_sketch(SketchPlan("uniform", 40, 20, seed=2)))
    norms = np.linalg.norm(rank_restricted_features(f, s=6, ell=10).B, axis=0)
    assert np.all(np.diff(norms) <= 1e-12)


def test_features_agree_with_pinv_path_at_full_ell():
    k = power_spsd(40, seed=3)
    f = nystrom_from_kernel(k, build_sketch(SketchPlan("gaussian", 40, 12, seed=3)))
    b = rank_restricted_features(f, s=5, ell=12).B
    approx = rank_restricted_approx(f, 5)
    assert np.linalg.norm(b @ b.T - approx, 2) <= 1e-7 * np.linalg.norm(k, 2)


def test_approx_examples():
    k = random_spsd(8, 3, seed=1)
    f = nystrom_from_kernel(k, selection_sketch(np.arange(8), 8))
    assert np.linalg.norm(rank_restricted_approx(f, 3) - k) <= 1e-7 * np.linalg.norm(k)
    f = nystrom_from_kernel(np.diag([4.0, 1.0]), selection_sketch([0, 1], 2))
    np.testing.assert_allclose(rank_restricted_approx(f, 1), np.diag([4.0, 0.0]), atol=1e-12)
    with pytest.raises(ValueError):
        rank_restricted_approx(f, 0)
    with pytest.raises(ValueError):
        rank_restricted_approx(f, 3)


def test_approx_matches_independent_oracle():
    k = power_spsd(60, seed=5)
    op = build_sketch(SketchPlan("uniform", 60, 30, seed=5))
    f = nystrom_from_kernel(k, op)
    # independent formula: form C W^+ C^T explicitly and truncate its eigendecomposition
    p = op.to_dense()
    c_mat = k @ p
    full = c_mat @ np.linalg.pinv(p.T @ k @ p, rcond=30 * np.finfo(float).eps, hermitian=True) @ c_mat.T
    oracle = _best_rank(0.5 * (full + full.T), 5)
    err = np.sum(np.abs(np.linalg.eigvalsh(k - rank_restricted_approx(f, 5))))
    err_oracle = np.sum(np.abs(np.linalg.eigvalsh(k - oracle)))
    assert err == pytest.approx(err_oracle, rel=1e-8)


def test_trace_error_ratio_conventions():
    k = power_spsd(20)
    assert trace_error_ratio(k, _best_rank(k, 4), 4) == pytest.approx(1.0, abs=1e-10)
    assert trace_error_ratio(k, k, 4) == pytest.approx(0.0, abs=1e-10)
    low = random_spsd(10, 2, seed=0)
    assert trace_error_ratio(low, low, 3) == 1.0
    assert trace_error_ratio(low, np.zeros((10, 10)), 3) == math.inf
    with pytest.raises(ValueError):
        trace_error_ratio(k, k[:5, :5], 2)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(KINDS), st.integers(5, 30), st.integers(1, 5), st.integers(0, 2**31))
def test_psd_ordering_and_floor(kind, c, s, seed):
    n = 30
    k = synthetic_spsd(np.random.default_rng(seed).uniform(0, 1, n) ** 3, seed)
    f = nystrom_from_kernel(k, _sketch(kind, k, c, seed))
    s = min(s, c)
    approx = rank_restricted_approx(f, s)
    sig_max = np.linalg.eigvalsh(k).max()
    assert np.linalg.eigvalsh(k - approx).min() >= -1e-7 * sig_max
    assert trace_error_ratio(k, approx, s) >= 1 - 1e-8


def test_error_nonincreasing_in_s():
    k = power_spsd(50, seed=8)
    f = nystrom_from_kernel(k, build_sketch(SketchPlan("srht", 50, 20, seed=8)))
    errs = [np.sum(np.abs(np.linalg.eigvalsh(k - rank_restricted_approx(f, s)))) for s in range(1, 21)]
    assert np.all(np.diff(errs) <= 1e-10 * errs[0])


def test_feature_extraction_is_deterministic():
    k = power_spsd(40, seed=9)
    a = rank_restricted_features(nystrom_from_kernel(k, SketchPlan("gaussian", 40, 12, seed=1)), 4).B
    b = rank_restricted_features(nystrom_from_kernel(k, SketchPlan("gaussian", 40, 12, seed=1)), 4).B
    np.testing.assert_array_equal(a, b)


def test_pinv_root_features_reproduce_factorisation():
    k = power_spsd(25, seed=1)
    f = nystrom_from_kernel(k, build_sketch(SketchPlan("gaussian", 25, 8, seed=1)))
    b = pinv_root_features(f, 8).B
    c_mat = f.C
    full = c_mat @ np.linalg.pinv(f.W, hermitian=True) @ c_mat.T
    np.testing.assert_allclose(b @ b.T, full, atol=1e-8)


def test_power_method_full_sketch_gives_best_rank():
    k = power_spsd(30, seed=4)
    b = power_method_features(k, 5, 30, 2, seed=0).B
    assert np.linalg.norm(b @ b.T - _best_rank(k, 5)) <= 1e-7 * np.linalg.norm(k)


def test_power_method_dominant_direction():
    b = power_method_features(np.diag([4.0, 1.0]), 1, 1, 40, seed=3).B
    np.testing.assert_allclose(np.abs(b[:, 0]), [2.0, 0.0], atol=1e-8)


def test_power_method_validation():
    k = np.eye(4)
    with pytest.raises(ValueError):
        power_method_features(k, 3, 2, 1)
    with pytest.raises(ValueError):
        power_method_features(k, 1, 2, 0)


def test_power_iterations_formula():
    lam = 0.7 ** np.arange(1, 201)
    assert power_iterations(lam, 10, 200, 0.5) == math.ceil(math.log(400) / math.log(1 / 0.7))
    assert power_iterations(np.array([2.0, 1.0]), 2, 5, 0.5) == 1
    with pytest.raises(ValueError):
        power_iterations(np.ones(5), 2, 5, 0.5)


def test_kpca_examples():
    b = kpca_features(np.eye(3), 3).B
    np.testing.assert_allclose(b @ b.T, np.eye(3), atol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(b, axis=1), 1.0)
    np.testing.assert_allclose(np.abs(kpca_features(np.diag([4.0, 1.0]), 1).B[:, 0]), [2.0, 0.0])
    with pytest.raises(ValueError):
        kpca_features(np.eye(3), 4)


def test_kpca_tail_equals_eigenvalue_tail():
    k = random_spsd(40, seed=6)
    b = kpca_features(k, 5).B
    lam = np.sort(np.linalg.eigvalsh(k))[::-1]
    err = np.sum(np.abs(np.linalg.eigvalsh(k - b @ b.T)))
    assert err == pytest.approx(np.sum(lam[5:]), rel=1e-8)


def test_rff_self_inner_product():
    a = DataMatrix(np.array([[0.3, -1.2]]))
    vals = [float(rff_features(a, 0.7, 512, seed).B[0] @ rff_features(a, 0.7, 512, seed).B[0]) for seed in range(50)]
    assert abs(np.mean(vals) - 1.0) <= 0.1


def test_rff_single_feature_bound(rng):
    z = rff_features(DataMatrix(rng.standard_normal((20, 3))), 1.0, 1, seed=0).B
    assert z.shape == (20, 1)
    assert np.all(np.abs(z) <= np.sqrt(2) + 1e-15)
    with pytest.raises(ValueError):
        rff_features(DataMatrix(np.ones((2, 1))), 1.0, 0)


def test_rff_matches_kernel_over_distances():
    sigma = 0.8
    rng = np.random.default_rng(21)
    dists = np.linspace(0, 2.5, 20)
    pts = np.vstack([[[0.0, 0.0], [d, 0.0]] for d in dists])
    z = rff_features(DataMatrix(pts), sigma, 512, seed=rng.integers(1000)).B
    approx = np.sum(z[0::2] * z[1::2], axis=1)
    np.testing.assert_allclose(approx, np.exp(-dists**2 / (2 * sigma**2)), atol=0.1)


def test_reduce_dimension_keeps_top_directions(rng):
    raw = rff_features(DataMatrix(rng.standard_normal((30, 2))), 1.0, 40, seed=0)
    red = reduce_dimension(raw, 5)
    assert red.B.shape == (30, 5) and red.params["s"] == 5
    assert np.linalg.norm(red.B @ red.B.T - _best_rank(raw.B @ raw.B.T, 5)) <= 1e-8 * np.linalg.norm(raw.B) ** 2
