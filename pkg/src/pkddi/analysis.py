"""Feature-weight analysis: top discriminative features, standardized
coefficients, and PCA over the weight vectors of multiple configurations.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, TextIO

import numpy as np
import scipy.sparse as sp

from .classifiers import TrainedModel
from .featurize import FeatureMatrix, Vocabulary
from .transforms import pca_decompose

__all__ = [
    "FeatureRanking",
    "WeightPanel",
    "top_features",
    "standardized_coefficients",
    "build_weight_panel",
    "weight_pca",
    "write_top_features_tsv",
    "write_projections_tsv",
]


@dataclass(frozen=True)
class FeatureRanking:
    relevant_top: tuple[tuple[str, float], ...]  # descending weight, all > 0
    irrelevant_top: tuple[tuple[str, float], ...]  # ascending weight, all < 0
    k: int


def top_features(
    model: TrainedModel, vocab: Vocabulary, k: int
) -> FeatureRanking:
    """The k most positive and k most negative hyperplane coefficients.

    Only textual features are ranked (count columns have no vocabulary
    key); ties break lexicographically.  Lists truncate when fewer than k
    coefficients have the required sign.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    w = model.weights[: model.n_text_features]
    if len(w) != len(vocab):
        raise ValueError(
            f"vocabulary size {len(vocab)} does not match {len(w)} text weights"
        )
    pairs = list(zip(vocab.features, w))
    positive = sorted(
        (pr for pr in pairs if pr[1] > 0), key=lambda pr: (-pr[1], pr[0])
    )
    negative = sorted(
        (pr for pr in pairs if pr[1] < 0), key=lambda pr: (pr[1], pr[0])
    )
    return FeatureRanking(
        relevant_top=tuple((f, float(v)) for f, v in positive[:k]),
        irrelevant_top=tuple((f, float(v)) for f, v in negative[:k]),
        k=k,
    )


def standardized_coefficients(
    model: TrainedModel, train: FeatureMatrix
) -> np.ndarray:
    """Weights scaled by per-feature training standard deviation (w_i * sigma_i).

    Constant features get 0 regardless of weight.  Computed on the matrix
    actually fed to the classifier, including count columns when the model
    consumed them.
    """
    X = train.augmented() if model.extras_in_weights else train.data
    if X.shape[1] != len(model.weights):
        raise ValueError(
            f"matrix has {X.shape[1]} columns but model has "
            f"{len(model.weights)} weights"
        )
    if sp.issparse(X):
        mean = np.asarray(X.mean(axis=0)).ravel()
        mean_sq = np.asarray(X.multiply(X).mean(axis=0)).ravel()
        var = np.maximum(mean_sq - mean**2, 0.0)
    else:
        var = np.asarray(X, dtype=np.float64).var(axis=0)
    return model.weights * np.sqrt(var)


@dataclass(frozen=True)
class WeightPanel:
    """Configurations x features matrix of (standardized) coefficients.

    Rows are aligned on the intersection of the configurations' feature
    keys; features absent anywhere are excluded rather than zero-filled.
    """

    config_names: tuple[str, ...]
    features: tuple[str, ...]
    matrix: np.ndarray  # (configs, features)


def build_weight_panel(
    entries: Sequence[tuple[str, Vocabulary, np.ndarray]]
) -> WeightPanel:
    """Align (name, vocabulary, per-feature coefficients) across runs."""
    if len(entries) < 2:
        raise ValueError("need at least two configurations for a panel")
    common: set[str] | None = None
    for _, vocab, coefs in entries:
        if len(vocab) != len(coefs):
            raise ValueError("coefficient vector does not match vocabulary")
        keys = set(vocab.features)
        common = keys if common is None else common & keys
    features = tuple(sorted(common))
    if not features:
        raise ValueError("configurations share no features")
    rows = []
    for _, vocab, coefs in entries:
        index = vocab.index
        rows.append([coefs[index[f]] for f in features])
    return WeightPanel(
        config_names=tuple(name for name, _, _ in entries),
        features=features,
        matrix=np.asarray(rows, dtype=np.float64),
    )


def weight_pca(panel: WeightPanel, k: int) -> dict:
    """PCA over configuration rows of the weight panel.

    Returns explained-variance ratios, component loadings (features), and
    per-configuration projections; k must be below the number of
    configurations.
    """
    n_configs = panel.matrix.shape[0]
    if k >= n_configs:
        raise ValueError(
            f"k={k} must be smaller than the number of configurations "
            f"({n_configs})"
        )
    if k < 1:
        raise ValueError("k must be at least 1")
    mean, V, s, total = pca_decompose(panel.matrix)
    rank = V.shape[1]
    k_eff = min(k, rank)
    V = V[:, :k_eff]
    projections = (panel.matrix - mean) @ V
    explained = (s[:k_eff] ** 2 / total) if total > 0 else np.zeros(k_eff)
    return {
        "explained_variance_ratios": explained,
        "loadings": V,
        "projections": projections,
        "config_names": panel.config_names,
        "rank": rank,
    }


def write_top_features_tsv(
    ranking: FeatureRanking,
    stream: TextIO,
    standardized: dict[str, float] | None = None,
) -> None:
    stream.write("side\trank\tfeature\tweight\tstandardized_weight\n")
    for side, items in (
        ("relevant", ranking.relevant_top),
        ("irrelevant", ranking.irrelevant_top),
    ):
        for i, (key, weight) in enumerate(items, start=1):
            extra = "" if standardized is None else f"{standardized.get(key, 0.0):.6g}"
            stream.write(f"{side}\t{i}\t{key}\t{weight:.6g}\t{extra}\n")


def write_projections_tsv(result: dict, stream: TextIO) -> None:
    k = result["projections"].shape[1]
    header = "config\t" + "\t".join(f"pc{i+1}" for i in range(k))
    stream.write(header + "\n")
    for name, row in zip(result["config_names"], result["projections"]):
        values = "\t".join(f"{v:.6g}" for v in row)
        stream.write(f"{name}\t{values}\n")
    stream.write(
        "#explained\t"
        + "\t".join(f"{v:.6g}" for v in result["explained_variance_ratios"])
        + "\n"
    )
