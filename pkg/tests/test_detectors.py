import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vcnet.detectors import (GradientBoosting, LogisticRegression, MahalanobisModel, OneClassSVM,
                             RandomForest, dump_model, load_model, mahalanobis_fit,
                             mahalanobis_score, model_from_dict, model_to_dict, rbf_kernel)
from vcnet.ingest import ValidationError
from vcnet.linalg import solve_spd

from oracles import inverse_mahalanobis


def blobs(rng, n=100, d=3, sep=3.0):
    X = np.vstack([rng.normal(0, 1, (n, d)), rng.normal(sep, 1, (n, d))])
    y = np.r_[np.zeros(n), np.ones(n)].astype(int)
    return X, y


def xor(rng, n=400):
    X = rng.uniform(-1, 1, (n, 2))
    y = ((X[:, 0] > 0) ^ (X[:, 1] > 0)).astype(int)
    return X, y


# ---------------------------------------------------------------- logistic


def test_logistic_separable_1d():
    X = np.r_[-np.ones(20), np.ones(20)][:, None]
    y = np.r_[np.zeros(20), np.ones(20)].astype(int)
    m = LogisticRegression().fit(X, y)
    assert np.all((m.predict_proba(X)[:, 1] >= 0.5) == y)


def test_logistic_midpoint_half(rng):
    a = rng.normal(0, 1, (50, 2))
    X = np.vstack([a - 2, -(a - 2)])
    y = np.r_[np.zeros(50), np.ones(50)].astype(int)
    m = LogisticRegression().fit(X, y)
    assert m.predict_proba(np.zeros((1, 2)))[0, 1] == pytest.approx(0.5, abs=1e-3)


def test_logistic_duplication_invariant(rng):
    X, y = blobs(rng, 60, 3, 1.0)
    a = LogisticRegression().fit(X, y)
    b = LogisticRegression().fit(np.vstack([X, X]), np.r_[y, y])
    wa = np.r_[a.coef_ / a.scale_, a.intercept_ - a.coef_ @ (a.mean_ / a.scale_)]
    wb = np.r_[b.coef_ / b.scale_, b.intercept_ - b.coef_ @ (b.mean_ / b.scale_)]
    np.testing.assert_allclose(wa, wb, atol=1e-6)


def test_logistic_converges(rng):
    X, y = blobs(rng, 60, 4, 1.0)
    m = LogisticRegression().fit(X, y)
    assert m.n_iter_ < m.max_iter
    _, grad = m._loss_grad(np.r_[m.coef_, m.intercept_], m._standardize(X), y.astype(float))
    assert np.max(np.abs(grad)) <= 1e-6


def test_binary_detector_errors():
    X = np.zeros((4, 2))
    for model in (LogisticRegression(), GradientBoosting()):
        with pytest.raises(ValueError, match="single class"):
            model.fit(X, [1, 1, 1, 1])
        with pytest.raises(ValueError, match="NaN"):
            model.fit(np.full((4, 2), np.nan), [0, 1, 0, 1])
    with pytest.raises(ValueError):
        RandomForest().fit(X, [0, 0, 0, 0])


# ---------------------------------------------------------------- trees


def test_gbdt_xor(rng):
    X, y = xor(rng)
    m = GradientBoosting().fit(X, y)
    assert np.mean((m.predict_proba(X)[:, 1] >= 0.5) == y) >= 0.95


def test_gbdt_constant_features_base_rate(rng):
    X = np.ones((30, 3))
    y = (rng.random(30) < 0.3).astype(int)
    y[:2] = [0, 1]
    m = GradientBoosting().fit(X, y)
    probe = rng.normal(size=(10, 3)) * 100
    np.testing.assert_allclose(m.predict_proba(probe)[:, 1], y.mean(), atol=1e-12)
    assert all(len(t.feature) == 1 for t in m.trees)


def test_gbdt_duplicate_feature_same_predictions(rng):
    X, y = xor(rng, 200)
    a = GradientBoosting().fit(X, y)
    X2 = np.column_stack([X, 3 * X[:, 0] + 1])
    b = GradientBoosting().fit(X2, y)
    np.testing.assert_array_equal(a.predict_proba(X), b.predict_proba(X2))


def test_gbdt_depth_and_leaf_limits(rng):
    X, y = blobs(rng, 50, 2, 1.0)
    m = GradientBoosting().fit(X, y)
    assert len(m.trees) == 100
    for tree in m.trees:
        assert tree.depth <= 3
        counts = np.bincount(tree.apply(X))
        leaves = [i for i, f in enumerate(tree.feature) if f < 0]
        assert all(counts[i] >= 2 for i in leaves)


def test_rf_memorizes(rng):
    X = rng.normal(size=(120, 6))
    y = rng.integers(0, 3, 120)
    m = RandomForest().fit(X, y)
    assert np.mean(m.predict(X) == y) == 1.0
    P = m.predict_proba(X)
    np.testing.assert_allclose(P.sum(axis=1), 1.0)


def test_rf_single_point():
    m = RandomForest(n_trees=10).fit(np.array([[1.0, 2.0]]), [1], classes=[0, 1])
    probe = np.random.default_rng(0).normal(size=(5, 2))
    np.testing.assert_array_equal(m.predict(probe), [1] * 5)


def test_tree_models_deterministic(rng):
    X, y = blobs(rng, 40, 5, 1.0)
    for cls in (RandomForest, GradientBoosting):
        a, b = cls(seed=3).fit(X, y), cls(seed=3).fit(X, y)
        assert json.dumps(a.to_dict()) == json.dumps(b.to_dict())
    c = RandomForest(seed=4).fit(X, y)
    assert json.dumps(c.to_dict()) != json.dumps(RandomForest(seed=3).fit(X, y).to_dict())


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_probabilities_valid(seed):
    rng = np.random.default_rng(seed)
    X, y = blobs(rng, 15, 3, rng.uniform(0, 3))
    for m in (LogisticRegression(max_iter=500), GradientBoosting(n_rounds=10),
              RandomForest(n_trees=5, seed=seed)):
        P = m.fit(X, y).predict_proba(X)
        assert np.all((P >= 0) & (P <= 1))
        np.testing.assert_allclose(P.sum(axis=1), 1.0)


# ---------------------------------------------------------------- one-class SVM


def test_ocsvm_cluster_score_order(rng):
    X = rng.normal(0, 0.1, (100, 3))
    m = OneClassSVM().fit(X)
    near = m.decision_function(np.full((1, 3), 0.01))
    far = m.decision_function(np.full((1, 3), 10.0))
    assert near > far


def test_ocsvm_nu_one_all_bounded(rng):
    X = rng.normal(size=(40, 2))
    m = OneClassSVM(nu=1.0).fit(X)
    np.testing.assert_allclose(m.alpha_, 1 / 40)
    assert m.alpha_.sum() == pytest.approx(1.0)


@pytest.mark.parametrize("nu", [0.05, 0.1, 0.3, 0.7])
def test_ocsvm_kkt_and_nu(rng, nu):
    X = np.vstack([rng.normal(0, 1, (120, 4)), rng.normal(4, 0.5, (30, 4))])
    m = OneClassSVM(nu=nu).fit(X)
    C = m.upper_bound_
    assert np.all(m.alpha_ >= 0) and np.all(m.alpha_ <= C)
    assert m.alpha_.sum() == pytest.approx(1.0, abs=1e-12)
    assert m.kkt_violation() <= 1e-4
    assert np.sum(m.decision_function(X) >= 0) >= (1 - nu) * X.shape[0]


def test_ocsvm_row_order_invariant(rng):
    X = rng.normal(size=(80, 3))
    probe = rng.normal(size=(20, 3)) * 2
    a = OneClassSVM().fit(X).decision_function(probe)
    b = OneClassSVM().fit(X[rng.permutation(80)]).decision_function(probe)
    np.testing.assert_allclose(a, b, atol=5e-4)


def test_ocsvm_identical_rows(rng):
    X = np.ones((10, 4))
    m = OneClassSVM().fit(X)
    assert m.gamma_ == 1.0
    s = m.decision_function(np.vstack([X[:1], X[:1] + 5]))
    assert np.all(np.isfinite(s)) and s[0] >= 0 > s[1]


def test_ocsvm_errors():
    with pytest.raises(ValueError):
        OneClassSVM().fit(np.zeros((0, 2)))
    with pytest.raises(ValueError):
        OneClassSVM(gamma=-1.0).fit(np.zeros((3, 2)))
    with pytest.raises(ValueError):
        OneClassSVM(nu=0.0).fit(np.zeros((3, 2)))


def test_rbf_kernel_values(rng):
    A, B = rng.normal(size=(300, 3)), rng.normal(size=(7, 3))
    K = rbf_kernel(A, B, 0.5)
    brute = np.array([[np.exp(-0.5 * np.sum((a - b) ** 2)) for b in B] for a in A])
    np.testing.assert_allclose(K, brute, rtol=1e-13)


# ---------------------------------------------------------------- Mahalanobis


def test_maha_hand_values():
    m = MahalanobisModel(np.array([[0.0]]), np.array([[1.0]]), 0.0)
    assert m.score(np.array([[2.0]]))[0] == -2.0
    m2 = MahalanobisModel(np.array([[0.0], [10.0]]), np.array([[1.0]]), 0.0)
    assert m2.score(np.array([[1.0]]))[0] == -0.5
    assert m2.score(np.array([[10.0]]))[0] == 0.0


def test_maha_fit_means(rng):
    X = np.vstack([rng.normal(0, 1, (500, 2)), rng.normal(10, 1, (500, 2))])
    y = np.r_[np.zeros(500), np.ones(500)].astype(int)
    m = mahalanobis_fit(X, y, "per_class")
    np.testing.assert_allclose(m.means, [[0, 0], [10, 10]], atol=0.2)
    np.testing.assert_allclose(m.cov, np.eye(2), atol=0.15)
    assert m.reg == pytest.approx(1e-6 * np.trace(m.cov) / 2)
    assert np.all(mahalanobis_score(m, m.means) == 0)


def test_maha_identical_rows_regularized():
    X = np.ones((5, 3))
    m = mahalanobis_fit(X, mode="pooled")
    assert np.linalg.matrix_rank(m.cov) == 0
    assert np.all(np.linalg.eigvalsh(m.regularized_cov()) > 0)
    assert np.all(np.isfinite(m.score(X + 1)))


def test_maha_pooled_ignores_ood(rng):
    X_in = rng.normal(size=(50, 3))
    y = np.r_[np.zeros(50), np.ones(20)].astype(int)
    a = mahalanobis_fit(np.vstack([X_in, rng.normal(5, 1, (20, 3))]), y, "pooled")
    b = mahalanobis_fit(np.vstack([X_in, rng.normal(-9, 3, (20, 3))]), y, "pooled")
    np.testing.assert_array_equal(a.means, b.means)
    np.testing.assert_array_equal(a.cov, b.cov)
    np.testing.assert_allclose(a.cov, np.cov(X_in, rowvar=False))


def test_maha_matches_inverse(rng):
    for _ in range(20):
        d = int(rng.integers(1, 30))
        M = rng.normal(size=(d, d))
        cov = M @ M.T + 0.1 * np.eye(d)
        means = rng.normal(size=(3, d))
        m = MahalanobisModel(means, cov, 0.0)
        x = rng.normal(size=(4, d))
        np.testing.assert_allclose(m.score(x), [inverse_mahalanobis(means, cov, r) for r in x],
                                   rtol=1e-8, atol=1e-8)


def test_maha_rotation_invariant(rng):
    d = 6
    X = rng.normal(size=(200, d)) @ rng.normal(size=(d, d))
    y = rng.integers(0, 2, 200)
    Q, _ = np.linalg.qr(rng.normal(size=(d, d)))
    m = mahalanobis_fit(X, y, "per_class")
    rot = MahalanobisModel(m.means @ Q.T, Q @ m.cov @ Q.T, m.reg)
    x = rng.normal(size=(10, d))
    np.testing.assert_allclose(m.score(x), rot.score(x @ Q.T), rtol=1e-8, atol=1e-8)


def test_maha_errors(rng):
    with pytest.raises(ValueError, match="at least 2"):
        mahalanobis_fit(rng.normal(size=(3, 2)), [0, 0, 1], "per_class")
    with pytest.raises(ValueError, match="at least 2"):
        mahalanobis_fit(rng.normal(size=(3, 2)), [0, 1, 1], "pooled")
    m = mahalanobis_fit(rng.normal(size=(10, 2)))
    with pytest.raises(ValueError, match="width"):
        m.score(np.zeros((1, 3)))


def test_solve_matches_explicit_inverse_randomly(rng):
    M = rng.normal(size=(8, 8))
    A = M @ M.T + np.eye(8)
    b = rng.normal(size=8)
    np.testing.assert_allclose(solve_spd(A, b), np.linalg.inv(A) @ b, rtol=1e-10)


# ---------------------------------------------------------------- artifacts


def test_model_round_trip(rng, tmp_path):
    X, y = blobs(rng, 40, 3, 1.0)
    models = [LogisticRegression().fit(X, y), GradientBoosting(n_rounds=20).fit(X, y),
              RandomForest(n_trees=10).fit(X, y), OneClassSVM().fit(X),
              mahalanobis_fit(X, y, "per_class")]
    probe = rng.normal(size=(25, 3))
    for m in models:
        path = tmp_path / f"{m.kind}.json"
        dump_model(m, path)
        back = load_model(path)
        assert type(back) is type(m)
        for fn in ("predict_proba", "decision_function", "score"):
            if hasattr(m, fn):
                np.testing.assert_array_equal(getattr(m, fn)(probe), getattr(back, fn)(probe))
                break
        doc = json.loads(path.read_text())
        assert doc["format"] == "vcnet-model" and doc["version"] == 1


def test_model_document_checks():
    good = model_to_dict(LogisticRegression().fit(np.array([[0.0], [1.0]]), [0, 1]))
    with pytest.raises(ValidationError):
        model_from_dict({**good, "version": 99})
    with pytest.raises(ValidationError):
        model_from_dict({**good, "kind": "svm2"})
    with pytest.raises(ValidationError):
        model_from_dict({"format": "other"})


def test_tree_serialization_is_nested(rng):
    X, y = blobs(rng, 30, 2, 2.0)
    doc = GradientBoosting(n_rounds=1).fit(X, y).to_dict()["trees"][0]
    assert {"feature", "threshold", "left", "right"} <= set(doc)
