"""Feature transforms: IDF/TFIDF weighting, L2 row normalization, and PCA.

All fitting reads the training split only; application is pure.  The
pipeline order is fixed: weighting, then L2 normalization, then PCA.
Count columns in ``FeatureMatrix.extras`` pass through every transform
untouched.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .featurize import FeatureMatrix

__all__ = [
    "Weighting",
    "TransformSpec",
    "FittedTransform",
    "fit_idf",
    "apply_weighting",
    "l2_normalize",
    "fit_pca",
    "project",
    "fit_transform",
    "apply_transform",
    "save_transform",
    "load_transform",
]

_PCA_COMPONENT_CHOICES = (100, 200, 400, 600, 800, 1000)
_RANK_TOL = 1e-10


class Weighting(enum.Enum):
    NONE = "none"
    IDF = "idf"
    TFIDF = "tfidf"


@dataclass(frozen=True)
class TransformSpec:
    """Which transforms to run; the order weighting -> L2 -> PCA is fixed."""

    weighting: Weighting = Weighting.NONE
    l2_normalize: bool = False
    pca_components: int | None = None
    free_pca: bool = False  # allow component counts outside the standard set

    def __post_init__(self) -> None:
        if self.pca_components is not None:
            if self.pca_components <= 0:
                raise ValueError("pca_components must be positive")
            if not self.free_pca and self.pca_components not in _PCA_COMPONENT_CHOICES:
                raise ValueError(
                    f"pca_components must be one of {_PCA_COMPONENT_CHOICES} "
                    "(or set free_pca)"
                )

    @property
    def is_identity(self) -> bool:
        return (
            self.weighting is Weighting.NONE
            and not self.l2_normalize
            and self.pca_components is None
        )

    def describe(self) -> str:
        parts = []
        if self.weighting is not Weighting.NONE:
            parts.append(self.weighting.value)
        if self.l2_normalize:
            parts.append("l2")
        if self.pca_components is not None:
            parts.append(f"pca{self.pca_components}")
        return "+".join(parts) if parts else "none"


@dataclass(frozen=True)
class FittedTransform:
    idf_values: np.ndarray | None = None
    pca_mean: np.ndarray | None = None
    pca_basis: np.ndarray | None = None  # (features, k), orthonormal columns
    singular_values: np.ndarray | None = None
    total_variance: float | None = None  # Frobenius energy of the centered fit data


def fit_idf(train: FeatureMatrix) -> FittedTransform:
    """Inverse document frequency: ln(N / (c_i + 1)) from binary training data."""
    X = train.data
    n = X.shape[0]
    col_counts = np.asarray(X.sum(axis=0)).ravel()
    return FittedTransform(idf_values=np.log(n / (col_counts + 1.0)))


def apply_weighting(
    m: FeatureMatrix, t: FittedTransform, spec: TransformSpec
) -> FeatureMatrix:
    """Scale occurrences by IDF; TFIDF further divides each row by its
    number of distinct in-vocabulary features."""
    if spec.weighting is Weighting.NONE:
        return m
    if t.idf_values is None:
        raise ValueError("transform was not fitted with IDF values")
    if len(t.idf_values) != m.n_features:
        raise ValueError("IDF length does not match feature count")
    X = m.data
    if sp.issparse(X):
        X = X.tocsr(copy=True)
        X.data = X.data * t.idf_values[X.indices]
        present = np.diff(X.indptr)
    else:
        X = np.asarray(X) * t.idf_values
        present = (m.dense() != 0).sum(axis=1)
    if spec.weighting is Weighting.TFIDF:
        denom = np.where(present > 0, present, 1).astype(np.float64)
        if sp.issparse(X):
            X = sp.diags(1.0 / denom) @ X
            X = X.tocsr()
        else:
            X = X / denom[:, None]
    return m.with_data(X)


def l2_normalize(m: FeatureMatrix) -> FeatureMatrix:
    """Scale each nonzero row to unit Euclidean norm; zero rows unchanged."""
    X = m.data
    if sp.issparse(X):
        X = X.tocsr(copy=True)
        norms = np.sqrt(np.asarray(X.multiply(X).sum(axis=1)).ravel())
        rows = np.repeat(np.arange(X.shape[0]), np.diff(X.indptr))
        divisor = np.where(norms > 0, norms, 1.0)
        X.data = X.data / divisor[rows]
        return m.with_data(X)
    X = np.asarray(X, dtype=np.float64)
    norms = np.linalg.norm(X, axis=1)
    return m.with_data(X / np.where(norms > 0, norms, 1.0)[:, None])


def _center_dense(X, mean: np.ndarray) -> np.ndarray:
    return (X.toarray() if sp.issparse(X) else np.asarray(X, dtype=np.float64)) - mean


def _centered_gram(X, mean: np.ndarray) -> np.ndarray:
    """Gram matrix of the row-centered data without densifying X."""
    if sp.issparse(X):
        XXt = (X @ X.T).toarray()
        Xm = np.asarray(X @ mean).ravel()
    else:
        X = np.asarray(X, dtype=np.float64)
        XXt = X @ X.T
        Xm = X @ mean
    mm = float(mean @ mean)
    return XXt - Xm[:, None] - Xm[None, :] + mm


def _fix_signs(V: np.ndarray) -> np.ndarray:
    """Deterministic sign convention: each column's max-|entry| is positive."""
    if V.size == 0:
        return V
    idx = np.abs(V).argmax(axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def eigen_rank_cut(evals_desc: np.ndarray, side: int, tol: float) -> np.ndarray:
    """Keep mask for eigenvalues of a Gram/covariance matrix.

    The squared formulation bottoms out at ~side*eps relative noise, so the
    nominal singular-value tolerance is floored there: eigenvalues below
    max(tol^2, side*eps) * lambda_max are rank-deficiency artifacts.
    """
    if evals_desc.size == 0:
        return np.zeros(0, dtype=bool)
    floor = max(tol * tol, side * np.finfo(np.float64).eps)
    return evals_desc > floor * evals_desc[0]


def pca_decompose(X, tol: float = _RANK_TOL):
    """Mean, orthonormal right singular vectors and singular values of the
    centered matrix, via the smaller-side eigendecomposition.

    Returns (mean, V, s, total_energy) with components sorted by decreasing
    singular value and truncated at the rank cut.
    """
    n, d = X.shape
    if sp.issparse(X):
        mean = np.asarray(X.mean(axis=0)).ravel()
    else:
        X = np.asarray(X, dtype=np.float64)
        mean = X.mean(axis=0)
    if d <= n:
        Xc = _center_dense(X, mean)
        C = Xc.T @ Xc
        evals, evecs = np.linalg.eigh(C)
        order = np.argsort(evals)[::-1]
        evals = np.clip(evals[order], 0.0, None)
        V = evecs[:, order]
        total = float(evals.sum())
        keep = eigen_rank_cut(evals, d, tol)
        V, s = V[:, keep], np.sqrt(evals[keep])
    else:
        G = _centered_gram(X, mean)
        evals, U = np.linalg.eigh(G)
        order = np.argsort(evals)[::-1]
        evals = np.clip(evals[order], 0.0, None)
        U = U[:, order]
        total = float(evals.sum())
        keep = eigen_rank_cut(evals, n, tol)
        U, s = U[:, keep], np.sqrt(evals[keep])
        # right singular vectors: V = Xc^T U / s, computed sparsely
        XtU = X.T @ U
        V = (XtU - np.outer(mean, U.sum(axis=0))) / s
    return mean, _fix_signs(V), s, total


def fit_pca(train: FeatureMatrix, k: int, tol: float = _RANK_TOL) -> FittedTransform:
    """Top-k principal directions of the mean-centered training matrix."""
    if k <= 0:
        raise ValueError("k must be positive")
    mean, V, s, total = pca_decompose(train.data, tol=tol)
    rank = V.shape[1]
    if k > rank:
        raise ValueError(f"k={k} exceeds effective rank {rank}")
    return FittedTransform(
        pca_mean=mean,
        pca_basis=V[:, :k],
        singular_values=s[:k],
        total_variance=total,
    )


def project(m: FeatureMatrix, t: FittedTransform) -> FeatureMatrix:
    """Map rows to (x - mean) @ basis; count columns pass through."""
    if t.pca_basis is None or t.pca_mean is None:
        raise ValueError("transform has no PCA fit")
    if m.n_features != t.pca_basis.shape[0]:
        raise ValueError(
            f"dimension mismatch: matrix has {m.n_features} features, "
            f"basis expects {t.pca_basis.shape[0]}"
        )
    X = m.data
    if sp.issparse(X):
        Z = np.asarray((X @ t.pca_basis)) - t.pca_mean @ t.pca_basis
    else:
        Z = (np.asarray(X, dtype=np.float64) - t.pca_mean) @ t.pca_basis
    return FeatureMatrix(row_ids=m.row_ids, data=Z, vocab=None, extras=dict(m.extras))


def explained_variance_ratios(t: FittedTransform) -> np.ndarray:
    if t.singular_values is None or not t.total_variance:
        raise ValueError("transform has no PCA fit")
    return t.singular_values**2 / t.total_variance


def fit_transform(train: FeatureMatrix, spec: TransformSpec) -> FittedTransform:
    """Fit every stage the spec asks for, on training data only."""
    idf = fit_idf(train).idf_values if spec.weighting is not Weighting.NONE else None
    fitted = FittedTransform(idf_values=idf)
    if spec.pca_components is not None:
        staged = _apply_pre_pca(train, fitted, spec)
        pca = fit_pca(staged, spec.pca_components)
        fitted = FittedTransform(
            idf_values=idf,
            pca_mean=pca.pca_mean,
            pca_basis=pca.pca_basis,
            singular_values=pca.singular_values,
            total_variance=pca.total_variance,
        )
    return fitted


def _apply_pre_pca(
    m: FeatureMatrix, t: FittedTransform, spec: TransformSpec
) -> FeatureMatrix:
    out = apply_weighting(m, t, spec)
    if spec.l2_normalize:
        out = l2_normalize(out)
    return out


def apply_transform(
    m: FeatureMatrix, t: FittedTransform, spec: TransformSpec
) -> FeatureMatrix:
    out = _apply_pre_pca(m, t, spec)
    if spec.pca_components is not None:
        out = project(out, t)
    return out


# --------------------------------------------------------------------------
# Persistence
# --------------------------------------------------------------------------

_FORMAT_VERSION = 1


def save_transform(path, t: FittedTransform, spec: TransformSpec) -> None:
    meta = {
        "format_version": _FORMAT_VERSION,
        "weighting": spec.weighting.value,
        "l2_normalize": spec.l2_normalize,
        "pca_components": spec.pca_components,
        "free_pca": spec.free_pca,
        "total_variance": t.total_variance,
    }
    arrays = {"meta": np.array(json.dumps(meta))}
    for name in ("idf_values", "pca_mean", "pca_basis", "singular_values"):
        value = getattr(t, name)
        if value is not None:
            arrays[name] = value
    np.savez_compressed(path, **arrays)


def load_transform(path) -> tuple[FittedTransform, TransformSpec]:
    with np.load(path, allow_pickle=False) as z:
        meta = json.loads(str(z["meta"]))
        if meta["format_version"] != _FORMAT_VERSION:
            raise ValueError(f"unsupported transform format {meta['format_version']}")
        get = lambda k: z[k] if k in z.files else None
        t = FittedTransform(
            idf_values=get("idf_values"),
            pca_mean=get("pca_mean"),
            pca_basis=get("pca_basis"),
            singular_values=get("singular_values"),
            total_variance=meta["total_variance"],
        )
    spec = TransformSpec(
        weighting=Weighting(meta["weighting"]),
        l2_normalize=meta["l2_normalize"],
        pca_components=meta["pca_components"],
        free_pca=meta["free_pca"],
    )
    return t, spec
