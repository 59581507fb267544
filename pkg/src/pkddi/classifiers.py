"""Six linear classifiers behind one train/score/predict contract.

Naive family (per-feature statistics, no covariance): the trigonometric
threshold classifier (arctan of class-conditional occurrence odds),
binomial Naive Bayes with a symmetric Beta prior, and diagonal LDA.
Covariance-aware family: regularized LDA (SVD rank reduction plus
shrinkage toward an equal-variance diagonal), logistic regression, and a
linear SVM.  Every model scores documents affinely; higher means more
likely Relevant.
"""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .corpus import Label
from .featurize import FeatureMatrix, Vocabulary
from .transforms import eigen_rank_cut
from .solvers import SolverResult, gram_matrix, train_linear_svm, train_logreg

__all__ = [
    "ClassifierKind",
    "TrainedModel",
    "ClassStats",
    "class_stats",
    "vtt_angle",
    "vtt_train",
    "nb_train",
    "dlda_train",
    "lda_train",
    "logreg_train",
    "svm_train",
    "score",
    "predict",
    "shared_stats",
    "train",
    "default_grid",
    "save_model",
    "load_model",
]

_QUARTER_PI = np.pi / 4.0


class ClassifierKind(enum.Enum):
    VTT = "vtt"
    NAIVE_BAYES = "nb"
    DLDA = "dlda"
    LDA = "lda"
    LOGREG = "logreg"
    SVM = "svm"


# inner-CV grids; c multiplies the loss term, so small c regularizes hardest
_DEFAULT_GRIDS: dict[ClassifierKind, tuple[float, ...]] = {
    ClassifierKind.LOGREG: (0.01, 0.1, 1.0, 10.0, 100.0),
    ClassifierKind.SVM: (0.01, 0.1, 1.0, 10.0, 100.0),
    ClassifierKind.NAIVE_BAYES: (0.1, 0.5, 1.0, 2.0, 5.0, 10.0),
    ClassifierKind.LDA: tuple(round(0.1 * i, 1) for i in range(11)),
    ClassifierKind.DLDA: tuple(round(0.1 * i, 1) for i in range(11)),
    ClassifierKind.VTT: (0.5, 1.0, 2.0, 4.0, 8.0, 16.0),  # per NER resource
}


def default_grid(kind: ClassifierKind) -> tuple[float, ...]:
    return _DEFAULT_GRIDS[kind]


@dataclass(frozen=True)
class TrainedModel:
    kind: ClassifierKind
    weights: np.ndarray
    bias: float
    ner_weights: dict[str, float] | None = None  # VTT resource weights beta_j
    extras_in_weights: tuple[str, ...] = ()  # resources folded into `weights`
    hyperparams: dict[str, float] = field(default_factory=dict)
    notes: tuple[str, ...] = ()
    vocab_hash: str | None = None

    @property
    def n_text_features(self) -> int:
        return len(self.weights) - len(self.extras_in_weights)


@dataclass(frozen=True)
class ClassStats:
    """Per-feature occurrence probabilities in each class."""

    p: np.ndarray  # relevant
    n: np.ndarray  # irrelevant
    n_relevant: int
    n_irrelevant: int


def _relevant_mask(labels) -> np.ndarray:
    if isinstance(labels, np.ndarray) and labels.dtype == bool:
        return labels
    return np.array([lab is Label.RELEVANT for lab in labels], dtype=bool)


def _col_sums(X, mask: np.ndarray) -> np.ndarray:
    sub = X[mask]
    return np.asarray(sub.sum(axis=0)).ravel()


def class_stats(X, labels) -> ClassStats:
    rel = _relevant_mask(labels)
    n_rel, n_irr = int(rel.sum()), int((~rel).sum())
    if n_rel == 0 or n_irr == 0:
        raise ValueError("both classes must be present in the training split")
    return ClassStats(
        p=_col_sums(X, rel) / n_rel,
        n=_col_sums(X, ~rel) / n_irr,
        n_relevant=n_rel,
        n_irrelevant=n_irr,
    )


def _require_binary(m: FeatureMatrix, kind: str) -> None:
    if not m.is_binary():
        raise ValueError(
            f"{kind} requires binary occurrence features; it is not evaluated "
            "on weighted or dense dimensionality-reduced data"
        )


# --------------------------------------------------------------------------
# VTT
# --------------------------------------------------------------------------

def vtt_angle(p, n):
    """Feature angle arctan(p/n) - pi/4, with one-sided limits at the axes
    and 0 when both probabilities vanish.

    Balanced features (p == n, including p == n == 0) map to exactly 0.
    """
    p = np.asarray(p, dtype=np.float64)
    n = np.asarray(n, dtype=np.float64)
    phi = np.where(p == n, 0.0, np.arctan2(p, n) - _QUARTER_PI)
    return float(phi) if phi.ndim == 0 else phi


def vtt_train(
    train: FeatureMatrix,
    labels,
    ner_beta: dict[str, float] | None = None,
) -> TrainedModel:
    """Angle-domain threshold classifier; the bias puts the neutral
    pseudo-document x = (p+n)/2 exactly on the hyperplane."""
    _require_binary(train, "VTT")
    stats = class_stats(train.data, labels)
    phi = vtt_angle(stats.p, stats.n)
    lam = float(phi @ ((stats.p + stats.n) / 2.0))
    beta = None
    hyper: dict[str, float] = {}
    if train.extras or ner_beta:
        ner_beta = ner_beta or {}
        if set(ner_beta) != set(train.extras):
            raise ValueError(
                f"VTT weights {sorted(ner_beta)} do not match NER resources "
                f"{sorted(train.extras)}"
            )
        beta = {name: float(ner_beta[name]) for name in train.extras}
        if any(b <= 0 for b in beta.values()):
            raise ValueError("VTT NER weights must be positive")
        hyper = {f"beta:{k}": v for k, v in beta.items()}
    return TrainedModel(
        kind=ClassifierKind.VTT,
        weights=phi,
        bias=-lam,
        ner_weights=beta,
        hyperparams=hyper,
        vocab_hash=train.vocab.content_hash() if train.vocab else None,
    )


# --------------------------------------------------------------------------
# Naive Bayes (binomial, symmetric Beta smoothing)
# --------------------------------------------------------------------------

def _nb_from_stats(
    stats: ClassStats, alpha: float, has_extras: bool
) -> TrainedModel:
    if alpha <= 0:
        raise ValueError("concentration parameter alpha must be positive")
    m_rel, m_irr = stats.n_relevant, stats.n_irrelevant
    theta_rel = (stats.p * m_rel + alpha) / (m_rel + 2.0 * alpha)
    theta_irr = (stats.n * m_irr + alpha) / (m_irr + 2.0 * alpha)
    w = np.log(theta_rel * (1.0 - theta_irr)) - np.log(theta_irr * (1.0 - theta_rel))
    bias = float(
        np.log(m_rel / m_irr)
        + np.log(1.0 - theta_rel).sum()
        - np.log(1.0 - theta_irr).sum()
    )
    notes = ()
    if has_extras:
        notes = (
            "NER count columns excluded: binomial Naive Bayes is defined on "
            "binary features",
        )
    return TrainedModel(
        kind=ClassifierKind.NAIVE_BAYES,
        weights=w,
        bias=bias,
        hyperparams={"alpha": float(alpha)},
        notes=notes,
    )


def nb_train(train: FeatureMatrix, labels, alpha: float) -> TrainedModel:
    _require_binary(train, "Naive Bayes")
    stats = class_stats(train.data, labels)
    return _with_vocab_hash(
        _nb_from_stats(stats, alpha, bool(train.extras)), train
    )


# --------------------------------------------------------------------------
# Diagonal LDA
# --------------------------------------------------------------------------

@dataclass
class _DldaStats:
    mu_rel: np.ndarray
    mu_irr: np.ndarray
    pooled_var: np.ndarray
    n_rel: int
    n_irr: int
    extras: tuple[str, ...]


def _dlda_stats(m: FeatureMatrix, labels) -> _DldaStats:
    X = m.augmented()
    rel = _relevant_mask(labels)
    n_rel, n_irr = int(rel.sum()), int((~rel).sum())
    if n_rel == 0 or n_irr == 0:
        raise ValueError("both classes must be present in the training split")
    sum_rel = _col_sums(X, rel)
    sum_irr = _col_sums(X, ~rel)
    X2 = X.multiply(X) if sp.issparse(X) else np.asarray(X) ** 2
    sq_rel = _col_sums(X2, rel)
    sq_irr = _col_sums(X2, ~rel)
    mu_rel, mu_irr = sum_rel / n_rel, sum_irr / n_irr
    scatter = (sq_rel - n_rel * mu_rel**2) + (sq_irr - n_irr * mu_irr**2)
    pooled = np.maximum(scatter, 0.0) / max(n_rel + n_irr - 2, 1)
    return _DldaStats(mu_rel, mu_irr, pooled, n_rel, n_irr, tuple(m.extras))


def _dlda_from_stats(stats: _DldaStats, shrink: float) -> TrainedModel:
    if not 0.0 <= shrink <= 1.0:
        raise ValueError("shrink must lie in [0, 1]")
    v = stats.pooled_var
    if not (v > 0).any():
        raise ValueError("all pooled feature variances are zero")
    v_shrunk = (1.0 - shrink) * v + shrink * v.mean()
    delta = stats.mu_rel - stats.mu_irr
    bad = (v_shrunk == 0) & (delta != 0)
    if bad.any():
        raise ValueError(
            "zero pooled variance for a class-separating feature; use shrink > 0"
        )
    w = np.divide(delta, v_shrunk, out=np.zeros_like(delta), where=v_shrunk > 0)
    bias = float(-w @ ((stats.mu_rel + stats.mu_irr) / 2.0)
                 + np.log(stats.n_rel / stats.n_irr))
    return TrainedModel(
        kind=ClassifierKind.DLDA,
        weights=w,
        bias=bias,
        extras_in_weights=stats.extras,
        hyperparams={"shrink": float(shrink)},
    )


def dlda_train(train: FeatureMatrix, labels, shrink: float) -> TrainedModel:
    model = _dlda_from_stats(_dlda_stats(train, labels), shrink)
    return _with_vocab_hash(model, train)


# --------------------------------------------------------------------------
# Regularized LDA (SVD rank reduction + shrinkage)
# --------------------------------------------------------------------------

@dataclass
class LdaBasis:
    """Centered training data expressed in its SVD row space.

    ``project_back`` maps a reduced-space direction to feature space
    without ever materializing the (features x rank) basis.
    """

    mean: np.ndarray
    U: np.ndarray  # (n, r) left singular vectors
    s: np.ndarray  # (r,) singular values
    Z: np.ndarray  # (n, r) projected training rows (= U * s)
    zbar_rel: np.ndarray
    zbar_irr: np.ndarray
    n_rel: int
    n_irr: int
    extras: tuple[str, ...]
    _X: object  # training matrix (sparse or dense), for the back-projection

    def project_back(self, direction: np.ndarray) -> np.ndarray:
        q = self.U @ (direction / self.s)
        w = np.asarray(self._X.T @ q).ravel()
        return w - self.mean * float(q.sum())


def lda_fit_basis(
    m: FeatureMatrix, labels, rank_tol: float = 1e-10
) -> LdaBasis:
    X = m.augmented()
    rel = _relevant_mask(labels)
    n_rel, n_irr = int(rel.sum()), int((~rel).sum())
    if n_rel == 0 or n_irr == 0:
        raise ValueError("both classes must be present in the training split")
    if sp.issparse(X):
        mean = np.asarray(X.mean(axis=0)).ravel()
        XXt = (X @ X.T).toarray()
        Xm = np.asarray(X @ mean).ravel()
    else:
        X = np.asarray(X, dtype=np.float64)
        mean = X.mean(axis=0)
        XXt = X @ X.T
        Xm = X @ mean
    G = XXt - Xm[:, None] - Xm[None, :] + float(mean @ mean)
    evals, U = np.linalg.eigh(G)
    order = np.argsort(evals)[::-1]
    evals = np.clip(evals[order], 0.0, None)
    U = U[:, order]
    keep = eigen_rank_cut(evals, G.shape[0], rank_tol)
    U, s = U[:, keep], np.sqrt(evals[keep])
    if s.size == 0:
        raise ValueError("training matrix has rank zero after centering")
    Z = U * s
    return LdaBasis(
        mean=mean,
        U=U,
        s=s,
        Z=Z,
        zbar_rel=Z[rel].mean(axis=0),
        zbar_irr=Z[~rel].mean(axis=0),
        n_rel=n_rel,
        n_irr=n_irr,
        extras=tuple(m.extras),
        _X=X,
    )


def _lda_solve_shrunk(basis: LdaBasis, shrink: float, rhs: np.ndarray) -> np.ndarray:
    """Solve (shrunk pooled covariance) x = rhs in the reduced space.

    The pooled within-class scatter there is diag(s^2) minus two rank-one
    class-mean terms, so each solve is O(rank) via Woodbury.
    """
    n = basis.n_rel + basis.n_irr
    dof = max(n - 2, 1)
    sigma2 = basis.s**2
    trace_w = float(
        sigma2.sum()
        - basis.n_rel * (basis.zbar_rel @ basis.zbar_rel)
        - basis.n_irr * (basis.zbar_irr @ basis.zbar_irr)
    )
    target = max(trace_w / dof, 0.0) / len(sigma2)
    diag = (1.0 - shrink) * sigma2 / dof + shrink * target
    a = np.sqrt((1.0 - shrink) * basis.n_rel / dof) * basis.zbar_rel
    b = np.sqrt((1.0 - shrink) * basis.n_irr / dof) * basis.zbar_irr
    if (diag <= 0).any():
        raise ValueError(
            "singular covariance in the reduced basis; use shrink > 0"
        )
    dinv_rhs = rhs / diag
    Ud = np.column_stack([a, b])
    dinv_U = Ud / diag[:, None]
    cap = -np.eye(2) + Ud.T @ dinv_U
    det = cap[0, 0] * cap[1, 1] - cap[0, 1] * cap[1, 0]
    scale = float(np.abs(cap).max())
    if abs(det) <= 1e-12 * max(scale * scale, 1e-300):
        raise ValueError(
            "singular pooled covariance estimate at this shrinkage; "
            "use shrink > 0"
        )
    gamma = np.linalg.solve(cap, Ud.T @ dinv_rhs)
    return dinv_rhs - dinv_U @ gamma


def _lda_from_basis(basis: LdaBasis, shrink: float) -> TrainedModel:
    if not 0.0 <= shrink <= 1.0:
        raise ValueError("shrink must lie in [0, 1]")
    delta = basis.zbar_rel - basis.zbar_irr
    direction = _lda_solve_shrunk(basis, shrink, delta)
    w = basis.project_back(direction)
    bias_z = float(
        -direction @ ((basis.zbar_rel + basis.zbar_irr) / 2.0)
        + np.log(basis.n_rel / basis.n_irr)
    )
    bias = bias_z - float(w @ basis.mean)
    return TrainedModel(
        kind=ClassifierKind.LDA,
        weights=w,
        bias=bias,
        extras_in_weights=basis.extras,
        hyperparams={"shrink": float(shrink)},
    )


def lda_train(
    train: FeatureMatrix, labels, shrink: float, rank_tol: float = 1e-10
) -> TrainedModel:
    basis = lda_fit_basis(train, labels, rank_tol=rank_tol)
    return _with_vocab_hash(_lda_from_basis(basis, shrink), train)


# --------------------------------------------------------------------------
# Margin classifiers
# --------------------------------------------------------------------------

def _signed_labels(labels) -> np.ndarray:
    rel = _relevant_mask(labels)
    return np.where(rel, 1.0, -1.0)


def _margin_model(
    kind: ClassifierKind, res: SolverResult, m: FeatureMatrix, c: float
) -> TrainedModel:
    notes = (res.note,) if res.note else ()
    return TrainedModel(
        kind=kind,
        weights=res.w,
        bias=res.b,
        extras_in_weights=tuple(m.extras),
        hyperparams={"c": float(c)},
        notes=notes,
        vocab_hash=m.vocab.content_hash() if m.vocab else None,
    )


def logreg_train(train: FeatureMatrix, labels, c: float) -> TrainedModel:
    res = train_logreg(train.augmented(), _signed_labels(labels), c)
    return _margin_model(ClassifierKind.LOGREG, res, train, c)


def svm_train(train: FeatureMatrix, labels, c: float) -> TrainedModel:
    res = train_linear_svm(train.augmented(), _signed_labels(labels), c)
    return _margin_model(ClassifierKind.SVM, res, train, c)


# --------------------------------------------------------------------------
# Scoring
# --------------------------------------------------------------------------

def _with_vocab_hash(model: TrainedModel, m: FeatureMatrix) -> TrainedModel:
    if m.vocab is None:
        return model
    from dataclasses import replace

    return replace(model, vocab_hash=m.vocab.content_hash())


def score(model: TrainedModel, docs: FeatureMatrix | np.ndarray) -> np.ndarray:
    """Confidence scores, one per row; affine in the feature vector."""
    if isinstance(docs, FeatureMatrix):
        if model.kind is ClassifierKind.VTT:
            if docs.n_features != len(model.weights):
                raise ValueError(
                    f"dimension mismatch: {docs.n_features} features vs "
                    f"{len(model.weights)} weights"
                )
            s = np.asarray(docs.data @ model.weights).ravel() + model.bias
            if model.ner_weights:
                for name, beta in model.ner_weights.items():
                    if name not in docs.extras:
                        raise ValueError(f"matrix lacks NER resource {name!r}")
                    s = s - (beta - docs.extras[name]) / beta
            return s
        if model.kind is ClassifierKind.NAIVE_BAYES:
            X = docs.data
        elif model.extras_in_weights:
            if tuple(docs.extras) != model.extras_in_weights:
                raise ValueError(
                    f"matrix resources {tuple(docs.extras)} do not match "
                    f"model resources {model.extras_in_weights}"
                )
            X = docs.augmented()
        else:
            X = docs.augmented() if docs.extras else docs.data
        if X.shape[1] != len(model.weights):
            raise ValueError(
                f"dimension mismatch: {X.shape[1]} features vs "
                f"{len(model.weights)} weights"
            )
        return np.asarray(X @ model.weights).ravel() + model.bias
    arr = np.asarray(docs, dtype=np.float64)
    X = np.atleast_2d(arr)
    if X.shape[1] != len(model.weights):
        raise ValueError(
            f"dimension mismatch: {X.shape[1]} features vs "
            f"{len(model.weights)} weights"
        )
    out = X @ model.weights + model.bias
    return float(out[0]) if arr.ndim == 1 else out


def predict(model: TrainedModel, docs) -> list[Label]:
    """Relevant iff the score is strictly positive; exact zero is Irrelevant."""
    return [
        Label.RELEVANT if s > 0 else Label.IRRELEVANT for s in score(model, docs)
    ]


# --------------------------------------------------------------------------
# Grid-sharing training front end
# --------------------------------------------------------------------------

@dataclass
class _MarginShared:
    K: np.ndarray | None = None
    warm: tuple[np.ndarray, float] | None = None
    alpha: np.ndarray | None = None
    last_c: float | None = None


def shared_stats(kind: ClassifierKind, m: FeatureMatrix, labels):
    """Precompute whatever a hyperparameter sweep can reuse."""
    if kind is ClassifierKind.LDA:
        return lda_fit_basis(m, labels)
    if kind is ClassifierKind.DLDA:
        return _dlda_stats(m, labels)
    if kind in (ClassifierKind.VTT, ClassifierKind.NAIVE_BAYES):
        _require_binary(m, "VTT" if kind is ClassifierKind.VTT else "Naive Bayes")
        return class_stats(m.data, labels)
    if kind is ClassifierKind.SVM:
        return _MarginShared(K=gram_matrix(m.augmented()))
    return _MarginShared()


def train(
    kind: ClassifierKind,
    m: FeatureMatrix,
    labels,
    param: float | dict[str, float] | None,
    shared=None,
) -> TrainedModel:
    """Train one classifier at one hyperparameter value.

    ``shared`` is an opaque object from :func:`shared_stats` over the same
    training matrix; margin classifiers also warm-start from the previous
    grid value through it.
    """
    if kind is ClassifierKind.VTT:
        beta = param if isinstance(param, dict) else None
        return vtt_train(m, labels, ner_beta=beta)
    if kind is ClassifierKind.NAIVE_BAYES:
        stats = shared if isinstance(shared, ClassStats) else None
        if stats is None:
            return nb_train(m, labels, float(param))
        return _with_vocab_hash(
            _nb_from_stats(stats, float(param), bool(m.extras)), m
        )
    if kind is ClassifierKind.DLDA:
        stats = shared if shared is not None else _dlda_stats(m, labels)
        return _with_vocab_hash(_dlda_from_stats(stats, float(param)), m)
    if kind is ClassifierKind.LDA:
        basis = shared if shared is not None else lda_fit_basis(m, labels)
        return _with_vocab_hash(_lda_from_basis(basis, float(param)), m)
    y = _signed_labels(labels)
    if kind is ClassifierKind.LOGREG:
        holder = shared if isinstance(shared, _MarginShared) else _MarginShared()
        res = train_logreg(m.augmented(), y, float(param), warm_start=holder.warm)
        holder.warm = (res.w.copy(), res.b)
        return _margin_model(kind, res, m, float(param))
    if kind is ClassifierKind.SVM:
        holder = shared if isinstance(shared, _MarginShared) else _MarginShared()
        X = m.augmented()
        if holder.K is None:
            holder.K = gram_matrix(X)
        alpha0 = None
        if holder.alpha is not None and holder.last_c:
            alpha0 = holder.alpha * (float(param) / holder.last_c)
        res = train_linear_svm(
            X, y, float(param), K=holder.K, alpha0=alpha0
        )
        holder.alpha = res.alpha
        holder.last_c = float(param)
        return _margin_model(kind, res, m, float(param))
    raise ValueError(f"unknown classifier kind {kind}")


# --------------------------------------------------------------------------
# Persistence
# --------------------------------------------------------------------------

_FORMAT_VERSION = 1


def save_model(path, model: TrainedModel, vocab: Vocabulary | None = None) -> None:
    meta = {
        "format_version": _FORMAT_VERSION,
        "kind": model.kind.value,
        "bias": model.bias,
        "hyperparams": model.hyperparams,
        "ner_weights": model.ner_weights,
        "extras_in_weights": list(model.extras_in_weights),
        "notes": list(model.notes),
        "vocab_hash": model.vocab_hash
        or (vocab.content_hash() if vocab is not None else None),
    }
    arrays = {"meta": np.array(json.dumps(meta)), "weights": model.weights}
    if vocab is not None:
        arrays["vocab_features"] = np.array(vocab.features, dtype=np.str_)
        arrays["vocab_doc_freq"] = vocab.doc_freq
    np.savez_compressed(path, **arrays)


def load_model(path) -> tuple[TrainedModel, Vocabulary | None]:
    with np.load(path, allow_pickle=False) as z:
        meta = json.loads(str(z["meta"]))
        if meta["format_version"] != _FORMAT_VERSION:
            raise ValueError(f"unsupported model format {meta['format_version']}")
        vocab = None
        if "vocab_features" in z.files:
            vocab = Vocabulary(
                features=tuple(str(k) for k in z["vocab_features"]),
                doc_freq=z["vocab_doc_freq"],
            )
        model = TrainedModel(
            kind=ClassifierKind(meta["kind"]),
            weights=z["weights"],
            bias=meta["bias"],
            ner_weights=meta["ner_weights"],
            extras_in_weights=tuple(meta["extras_in_weights"]),
            hyperparams=meta["hyperparams"],
            notes=tuple(meta["notes"]),
            vocab_hash=meta["vocab_hash"],
        )
    return model, vocab
