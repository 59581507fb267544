"""IDF/TFIDF weighting, L2 normalization, and PCA."""

import numpy as np
import pytest
import scipy.sparse as sp

from pkddi.featurize import FeatureMatrix
from pkddi.transforms import (
    FittedTransform,
    TransformSpec,
    Weighting,
    apply_transform,
    apply_weighting,
    explained_variance_ratios,
    fit_idf,
    fit_pca,
    fit_transform,
    l2_normalize,
    load_transform,
    project,
    save_transform,
)


def fm(X, row_ids=None, extras=None):
    X = sp.csr_matrix(np.asarray(X, dtype=np.float64))
    n = X.shape[0]
    return FeatureMatrix(
        row_ids=tuple(row_ids or (str(i) for i in range(n))),
        data=X,
        vocab=None,
        extras=extras or {},
    )


class TestIdf:
    def test_formula_values(self):
        # N=100: c=99 -> ln(100/100)=0; c=9 -> ln(10)
        X = np.zeros((100, 2))
        X[:99, 0] = 1.0
        X[:9, 1] = 1.0
        t = fit_idf(fm(X))
        assert t.idf_values[0] == pytest.approx(0.0, abs=1e-15)
        assert t.idf_values[1] == pytest.approx(np.log(10.0), abs=1e-12)

    def test_absent_feature(self):
        X = np.zeros((10, 1))
        t = fit_idf(fm(X))
        assert t.idf_values[0] == pytest.approx(np.log(10.0), abs=1e-12)

    def test_monotone_in_counts(self):
        rng = np.random.default_rng(0)
        X = (rng.random((40, 12)) < rng.random(12)).astype(float)
        t = fit_idf(fm(X))
        counts = X.sum(axis=0)
        order = np.argsort(counts)
        for a, b in zip(order, order[1:]):
            if counts[a] < counts[b]:
                assert t.idf_values[a] > t.idf_values[b]


class TestWeighting:
    def test_none_is_identity(self):
        X = np.array([[1.0, 0.0], [1.0, 1.0]])
        m = fm(X)
        out = apply_weighting(m, FittedTransform(), TransformSpec())
        assert out is m

    def test_tfidf_divides_by_present_features(self):
        # doc has features {a, b}; idf(a)=2, idf(b)=4 -> entries 1 and 2
        m = fm(np.array([[1.0, 1.0]]))
        t = FittedTransform(idf_values=np.array([2.0, 4.0]))
        spec = TransformSpec(weighting=Weighting.TFIDF)
        out = apply_weighting(m, t, spec)
        assert out.dense().tolist() == [[1.0, 2.0]]

    def test_tfidf_zero_row_stays_zero(self):
        m = fm(np.array([[0.0, 0.0], [1.0, 0.0]]))
        t = FittedTransform(idf_values=np.array([3.0, 5.0]))
        out = apply_weighting(m, t, TransformSpec(weighting=Weighting.TFIDF))
        assert out.dense()[0].tolist() == [0.0, 0.0]
        assert out.dense()[1].tolist() == [3.0, 0.0]

    def test_idf_scales_occurrences(self):
        m = fm(np.array([[1.0, 1.0], [0.0, 1.0]]))
        t = FittedTransform(idf_values=np.array([0.5, 2.0]))
        out = apply_weighting(m, t, TransformSpec(weighting=Weighting.IDF))
        assert out.dense().tolist() == [[0.5, 2.0], [0.0, 2.0]]


class TestL2:
    def test_three_four_five(self):
        out = l2_normalize(fm(np.array([[3.0, 4.0]])))
        assert out.dense().tolist() == [[0.6, 0.8]]

    def test_zero_row_unchanged(self):
        out = l2_normalize(fm(np.array([[0.0, 0.0]])))
        assert out.dense().tolist() == [[0.0, 0.0]]

    def test_unit_norms(self):
        rng = np.random.default_rng(1)
        X = rng.random((20, 7)) * (rng.random((20, 7)) < 0.4)
        out = l2_normalize(fm(X))
        norms = np.linalg.norm(out.dense(), axis=1)
        nonzero = np.linalg.norm(X, axis=1) > 0
        assert np.allclose(norms[nonzero], 1.0, atol=1e-12)
        assert (norms[~nonzero] == 0).all()


class TestPca:
    def test_collinear_points(self):
        pts = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
        t = fit_pca(fm(pts), k=1)
        direction = np.abs(t.pca_basis[:, 0])
        assert np.allclose(direction, 1 / np.sqrt(2), atol=1e-12)
        # rank is 1: asking for 2 components must fail
        with pytest.raises(ValueError, match="effective rank 1"):
            fit_pca(fm(pts), k=2, tol=1e-10)

    def test_training_mean_projects_to_zero(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(12, 5))
        t = fit_pca(fm(X), k=3)
        z = (X.mean(axis=0) - t.pca_mean) @ t.pca_basis
        assert np.allclose(z, 0.0, atol=1e-12)

    def test_full_rank_preserves_distances(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(10, 6))
        m = fm(X)
        k = min(X.shape[0] - 1, X.shape[1])
        t = fit_pca(m, k=k)
        Z = project(m, t).dense()
        for i in range(len(X)):
            for j in range(i):
                d0 = np.linalg.norm(X[i] - X[j])
                d1 = np.linalg.norm(Z[i] - Z[j])
                assert d1 == pytest.approx(d0, abs=1e-8)

    def test_reconstruction_at_full_rank(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(5, 3))
        m = fm(X)
        t = fit_pca(m, k=3)
        Z = project(m, t).dense()
        back = Z @ t.pca_basis.T + t.pca_mean
        assert np.allclose(back, X, atol=1e-9)

    def test_matches_covariance_eigendecomposition(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(5, 3))
        t = fit_pca(fm(X), k=3)
        Xc = X - X.mean(axis=0)
        evals, evecs = np.linalg.eigh(Xc.T @ Xc)
        order = np.argsort(evals)[::-1]
        evecs = evecs[:, order]
        for j in range(3):
            dot = abs(t.pca_basis[:, j] @ evecs[:, j])
            assert dot == pytest.approx(1.0, abs=1e-9)

    def test_orthonormal_and_variance_ordered(self):
        rng = np.random.default_rng(6)
        for trial in range(20):
            n = int(rng.integers(4, 30))
            d = int(rng.integers(2, 30))
            X = rng.normal(size=(n, d))
            k = min(n - 1, d)
            t = fit_pca(fm(X), k=k)
            B = t.pca_basis
            assert np.allclose(B.T @ B, np.eye(k), atol=1e-10)
            s = t.singular_values
            assert (np.diff(s) <= 1e-12).all()

    def test_gram_side_matches_dense_side(self):
        # tall-thin vs short-wide code paths agree on the projections
        rng = np.random.default_rng(7)
        X = rng.normal(size=(6, 9))  # d > n: Gram side
        m = fm(X)
        t = fit_pca(m, k=4)
        Z = project(m, t).dense()
        Xc = X - X.mean(axis=0)
        U, s, Vt = np.linalg.svd(Xc, full_matrices=False)
        Z_ref = Xc @ Vt[:4].T
        for j in range(4):
            ratio = Z[:, j] @ Z_ref[:, j] / (Z_ref[:, j] @ Z_ref[:, j])
            assert abs(abs(ratio) - 1.0) < 1e-9

    def test_projection_dimension_mismatch(self):
        rng = np.random.default_rng(8)
        t = fit_pca(fm(rng.normal(size=(6, 4))), k=2)
        with pytest.raises(ValueError, match="dimension mismatch"):
            project(fm(rng.normal(size=(3, 5))), t)

    def test_extras_pass_through(self):
        rng = np.random.default_rng(9)
        X = rng.normal(size=(6, 4))
        counts = np.arange(6.0)
        m = fm(X, extras={"B": counts})
        t = fit_pca(m, k=2)
        out = project(m, t)
        assert out.data.shape == (6, 2)
        assert (out.extras["B"] == counts).all()


class TestSpecValidation:
    def test_component_choices(self):
        TransformSpec(pca_components=400)
        with pytest.raises(ValueError, match="must be one of"):
            TransformSpec(pca_components=123)
        TransformSpec(pca_components=123, free_pca=True)
        with pytest.raises(ValueError, match="positive"):
            TransformSpec(pca_components=-5, free_pca=True)

    def test_describe(self):
        assert TransformSpec().describe() == "none"
        spec = TransformSpec(
            weighting=Weighting.TFIDF, l2_normalize=True,
            pca_components=100,
        )
        assert spec.describe() == "tfidf+l2+pca100"


def test_fit_apply_pipeline_order():
    rng = np.random.default_rng(10)
    X = (rng.random((30, 12)) < 0.4).astype(float)
    m = fm(X)
    spec = TransformSpec(
        weighting=Weighting.IDF, l2_normalize=True, pca_components=5,
        free_pca=True,
    )
    fitted = fit_transform(m, spec)
    out = apply_transform(m, fitted, spec)
    assert out.data.shape == (30, 5)
    # manual pipeline gives the same result
    staged = apply_weighting(m, fitted, spec)
    staged = l2_normalize(staged)
    manual = project(staged, fitted).dense()
    assert np.allclose(out.dense(), manual, atol=1e-12)


def test_explained_variance_ratios_sum_to_one_at_full_rank():
    rng = np.random.default_rng(11)
    X = rng.normal(size=(8, 5))
    t = fit_pca(fm(X), k=5)
    ratios = explained_variance_ratios(t)
    assert ratios.sum() == pytest.approx(1.0, abs=1e-10)


def test_transform_persistence_round_trip(tmp_path):
    rng = np.random.default_rng(12)
    X = (rng.random((20, 8)) < 0.5).astype(float)
    m = fm(X)
    spec = TransformSpec(weighting=Weighting.IDF, pca_components=3, free_pca=True)
    fitted = fit_transform(m, spec)
    path = tmp_path / "transform.npz"
    save_transform(path, fitted, spec)
    loaded, spec2 = load_transform(path)
    assert spec2 == spec
    assert np.allclose(loaded.idf_values, fitted.idf_values)
    assert np.allclose(loaded.pca_basis, fitted.pca_basis)
    assert np.allclose(
        apply_transform(m, loaded, spec2).dense(),
        apply_transform(m, fitted, spec).dense(),
        atol=1e-15,
    )
