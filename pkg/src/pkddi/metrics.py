"""Classification metrics: F1, Matthews correlation, interpolated PR AUC,
and the three-way rank product.

iAUC integrates the interpolated precision/recall curve, where the
interpolated precision at recall r is the maximum precision achieved at
any recall >= r.  Tied scores are consumed as one block so the curve does
not depend on the order of equal-score documents.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .corpus import Label

__all__ = [
    "ConfusionCounts",
    "confusion_counts",
    "f1",
    "mcc",
    "iauc",
    "competition_ranks",
    "rp3",
]


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be non-negative")


def confusion_counts(
    true_relevant: np.ndarray, predicted_relevant: np.ndarray
) -> ConfusionCounts:
    t = np.asarray(true_relevant, dtype=bool)
    p = np.asarray(predicted_relevant, dtype=bool)
    if t.shape != p.shape:
        raise ValueError("label arrays differ in length")
    return ConfusionCounts(
        tp=int((t & p).sum()),
        fp=int((~t & p).sum()),
        fn=int((t & ~p).sum()),
        tn=int((~t & ~p).sum()),
    )


def f1(c: ConfusionCounts) -> float:
    """Harmonic mean of precision and recall; 0 when there are no true
    positives."""
    if c.tp == 0:
        return 0.0
    precision = c.tp / (c.tp + c.fp)
    recall = c.tp / (c.tp + c.fn)
    return 2.0 * precision * recall / (precision + recall)


def mcc(c: ConfusionCounts) -> float:
    """Matthews correlation; 0 when any confusion-table margin is empty."""
    denom_sq = (c.tp + c.fp) * (c.tp + c.fn) * (c.tn + c.fp) * (c.tn + c.fn)
    if denom_sq == 0:
        return 0.0
    return (c.tp * c.tn - c.fp * c.fn) / math.sqrt(denom_sq)


def _pr_points(scores: np.ndarray, relevant: np.ndarray):
    """Cumulative (recall, precision) after each block of tied scores,
    ranked by descending score."""
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    rel = relevant[order]
    # block boundaries: last index of each run of equal scores
    boundaries = np.flatnonzero(np.diff(s) != 0)
    ends = np.append(boundaries, len(s) - 1)
    cum_rel = np.cumsum(rel)
    total_rel = cum_rel[-1]
    tp = cum_rel[ends]
    retrieved = ends + 1
    recall = tp / total_rel
    precision = tp / retrieved
    return recall, precision


def iauc(
    scores: Sequence[float] | np.ndarray,
    relevant: Sequence[bool] | np.ndarray,
    grid: str = "staircase",
) -> float:
    """Area under the interpolated precision/recall curve.

    ``grid="staircase"`` integrates the exact step curve over recall in
    [0, 1]; ``grid="eleven-point"`` averages interpolated precision at
    recall 0.0, 0.1, ..., 1.0 (a coarser convention kept for sensitivity
    checks).
    """
    scores = np.asarray(scores, dtype=np.float64)
    relevant = np.asarray(relevant, dtype=bool)
    if scores.shape != relevant.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be 1-D and equal length")
    if relevant.all() or not relevant.any():
        raise ValueError(
            "iAUC needs at least one relevant and one irrelevant document"
        )
    recall, precision = _pr_points(scores, relevant)
    # interpolated precision: best precision at this recall or beyond
    interp = np.maximum.accumulate(precision[::-1])[::-1]
    if grid == "staircase":
        widths = np.diff(np.concatenate([[0.0], recall]))
        return float(widths @ interp)
    if grid == "eleven-point":
        points = np.linspace(0.0, 1.0, 11)
        # first achieved recall at or above each grid point
        idx = np.searchsorted(recall, points, side="left")
        idx = np.minimum(idx, len(recall) - 1)
        values = [
            interp[i] if recall[i] >= r - 1e-15 else 0.0
            for r, i in zip(points, idx)
        ]
        return float(np.mean(values))
    raise ValueError(f"unknown iAUC grid {grid!r}")


def competition_ranks(
    values: Iterable[float], decimals: int = 3, higher_better: bool = True
) -> list[int]:
    """Competition ("1224") ranking after rounding, ties share the minimum
    rank; rounding to 3 decimals matches the reporting convention."""
    rounded = [round(v, decimals) for v in values]
    ranks = []
    for v in rounded:
        better = sum(1 for u in rounded if (u > v) == higher_better and u != v)
        ranks.append(better + 1)
    return ranks


def rp3(rank_f1: int, rank_mcc: int, rank_iauc: int) -> int:
    """Rank product across the three measures; lower is better."""
    if min(rank_f1, rank_mcc, rank_iauc) < 1:
        raise ValueError("ranks are 1-based positive integers")
    return rank_f1 * rank_mcc * rank_iauc
