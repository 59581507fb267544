"""Nested cross-validation: fold plans, hyperparameter selection by inner
MCC, grid execution, paired permutation significance tests, and report
serialization.

The outer level estimates generalization (4 random 4-way partitions of
the corpus, 75%/25% splits, 16 folds); each outer training split gets its
own 16 inner folds for hyperparameter selection.  Every configuration in
a run consumes the same plan.  All randomness descends from one seed
through named substreams, so identical seeds reproduce identical plans,
reports, and files.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__
from .classifiers import (
    ClassifierKind,
    TrainedModel,
    default_grid,
    score as model_score,
    shared_stats,
    train as train_classifier,
)
from .corpus import Corpus, Dictionary, Label, NerCountTable
from .featurize import (
    FeatureMatrix,
    FeatureSpace,
    NgramOrder,
    attach_counts,
    resource_count_vector,
)
from .metrics import competition_ranks, confusion_counts, f1, iauc, mcc, rp3
from .transforms import TransformSpec, Weighting, apply_transform, fit_transform

__all__ = [
    "Fold",
    "FoldPlan",
    "RunConfig",
    "FoldRecord",
    "EvalReport",
    "make_fold_plan",
    "paired_permutation_test",
    "significance_matrix",
    "run_grid",
    "write_report",
    "read_report_bundle",
    "compare_reports",
]

_METRICS = ("f1", "mcc", "iauc")

# substream tags so every random draw has a fixed address under the run seed
_STREAM_OUTER = 1
_STREAM_INNER = 2
_STREAM_MC = 3


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=tuple(key))
    )


@dataclass(frozen=True)
class Fold:
    train_ids: tuple[str, ...]
    test_ids: tuple[str, ...]


@dataclass(frozen=True)
class FoldPlan:
    seed: int
    stratified: bool
    outer: tuple[Fold, ...]
    inner: tuple[tuple[Fold, ...], ...]  # one tuple of folds per outer fold
    fingerprint: str


def _balanced_sizes(total: int, parts: int) -> list[int]:
    base, rem = divmod(total, parts)
    return [base + 1 if g < rem else base for g in range(parts)]


def _partition_ids(
    ids: Sequence[str],
    labels: dict[str, Label],
    parts: int,
    rng: np.random.Generator,
    stratified: bool,
) -> list[list[str]]:
    """One random split of ids into ``parts`` groups whose sizes differ by
    at most one; stratified mode also balances each class across groups."""
    if not stratified:
        shuffled = list(ids)
        rng.shuffle(shuffled)
        sizes = _balanced_sizes(len(ids), parts)
        groups, start = [], 0
        for size in sizes:
            groups.append(shuffled[start : start + size])
            start += size
        return groups

    targets = _balanced_sizes(len(ids), parts)
    groups: list[list[str]] = [[] for _ in range(parts)]
    deficits = list(targets)
    for label in (Label.RELEVANT, Label.IRRELEVANT):
        class_ids = [i for i in ids if labels[i] is label]
        rng.shuffle(class_ids)
        base, rem = divmod(len(class_ids), parts)
        # the +1 remainders go where the deficit is largest (ties: low index)
        order = sorted(range(parts), key=lambda g: (-deficits[g], g))
        sizes = [base] * parts
        for g in order[:rem]:
            sizes[g] += 1
        start = 0
        for g in range(parts):
            chunk = class_ids[start : start + sizes[g]]
            groups[g].extend(chunk)
            deficits[g] -= sizes[g]
            start += sizes[g]
    return groups


def _folds_from_groups(groups: list[list[str]]) -> list[Fold]:
    folds = []
    for g in range(len(groups)):
        test = sorted(groups[g])
        train = sorted(itertools.chain(*(groups[h] for h in range(len(groups)) if h != g)))
        folds.append(Fold(train_ids=tuple(train), test_ids=tuple(test)))
    return folds


def _train_has_both_classes(fold: Fold, labels: dict[str, Label]) -> bool:
    seen = {labels[i] for i in fold.train_ids}
    return len(seen) == 2


def _make_folds(
    ids: Sequence[str],
    labels: dict[str, Label],
    seed: int,
    stream: tuple[int, ...],
    stratified: bool,
    repeats: int,
    parts: int,
    max_retries: int,
) -> list[Fold]:
    folds: list[Fold] = []
    for repeat in range(repeats):
        for attempt in range(max_retries + 1):
            rng = _rng(seed, *stream, repeat, attempt)
            groups = _partition_ids(ids, labels, parts, rng, stratified)
            candidate = _folds_from_groups(groups)
            if all(_train_has_both_classes(f, labels) for f in candidate):
                folds.extend(candidate)
                break
        else:
            raise ValueError(
                f"could not build folds with both classes in every training "
                f"split after {max_retries} retries"
            )
    return folds


def make_fold_plan(
    ids: Sequence[str],
    labels: dict[str, Label],
    seed: int,
    *,
    stratified: bool = True,
    repeats: int = 4,
    parts: int = 4,
    max_retries: int = 100,
) -> FoldPlan:
    """Outer folds plus nested inner folds, deterministic under the seed."""
    ids = list(ids)
    if len(ids) < 2 * parts:
        raise ValueError(f"need at least {2 * parts} documents")
    if len({labels[i] for i in ids}) < 2:
        raise ValueError("both classes must be present")
    outer = _make_folds(
        ids, labels, seed, (_STREAM_OUTER,), stratified, repeats, parts, max_retries
    )
    inner = []
    for k, fold in enumerate(outer):
        inner.append(
            tuple(
                _make_folds(
                    list(fold.train_ids),
                    labels,
                    seed,
                    (_STREAM_INNER, k),
                    stratified,
                    repeats,
                    parts,
                    max_retries,
                )
            )
        )
    digest = hashlib.sha256()
    digest.update(
        json.dumps(
            {
                "seed": seed,
                "stratified": stratified,
                "outer": [[f.train_ids, f.test_ids] for f in outer],
                "inner": [
                    [[f.train_ids, f.test_ids] for f in folds] for folds in inner
                ],
            },
            sort_keys=True,
        ).encode()
    )
    return FoldPlan(
        seed=seed,
        stratified=stratified,
        outer=tuple(outer),
        inner=tuple(inner),
        fingerprint=digest.hexdigest(),
    )


# --------------------------------------------------------------------------
# Run configurations
# --------------------------------------------------------------------------

_BINARY_ONLY = (ClassifierKind.VTT, ClassifierKind.NAIVE_BAYES)


@dataclass(frozen=True)
class RunConfig:
    """One point of the evaluation grid: classifier x features x transform."""

    classifier: ClassifierKind
    ngrams: NgramOrder = NgramOrder.UNIGRAM
    transform: TransformSpec = TransformSpec()
    ner_resources: tuple[str, ...] = ()
    grid: tuple[float, ...] | None = None
    label: str | None = None

    def __post_init__(self) -> None:
        if self.classifier in _BINARY_ONLY and not self.transform.is_identity:
            name = "VTT" if self.classifier is ClassifierKind.VTT else "Naive Bayes"
            raise ValueError(
                f"{name} runs on sparse binary occurrences only; weighting, "
                "L2 normalization and PCA are not supported for it"
            )
        if self.grid is not None:
            if len(self.grid) == 0:
                raise ValueError("hyperparameter grid must be non-empty")
            if any(b <= a for a, b in zip(self.grid, self.grid[1:])):
                raise ValueError("hyperparameter grid must be strictly increasing")
        if (
            self.classifier is ClassifierKind.NAIVE_BAYES
            and self.ner_resources
        ):
            raise ValueError(
                "Naive Bayes does not take NER count features (non-binary)"
            )

    @property
    def name(self) -> str:
        if self.label:
            return self.label
        parts = [self.classifier.value, self.ngrams.value]
        if not self.transform.is_identity:
            parts.append(self.transform.describe())
        if self.ner_resources:
            parts.append("ner=" + ",".join(self.ner_resources))
        return "-".join(parts)

    def hyperparam_grid(self) -> list[float | dict[str, float]] | None:
        """Grid values in selection order (ties resolve to the earliest)."""
        if self.classifier is ClassifierKind.VTT:
            if not self.ner_resources:
                return None  # no cross-validated parameter in the text-only case
            values = self.grid if self.grid is not None else default_grid(self.classifier)
            names = sorted(self.ner_resources)
            return [
                dict(zip(names, combo))
                for combo in itertools.product(values, repeat=len(names))
            ]
        values = self.grid if self.grid is not None else default_grid(self.classifier)
        return list(values)

    def fingerprint(self) -> str:
        payload = {
            "classifier": self.classifier.value,
            "ngrams": self.ngrams.value,
            "transform": {
                "weighting": self.transform.weighting.value,
                "l2_normalize": self.transform.l2_normalize,
                "pca_components": self.transform.pca_components,
            },
            "ner_resources": list(self.ner_resources),
            "grid": list(self.grid) if self.grid is not None else None,
        }
        return hashlib.sha256(
            json.dumps(payload, sort_keys=True).encode()
        ).hexdigest()


# --------------------------------------------------------------------------
# Permutation significance testing
# --------------------------------------------------------------------------

def _perm_stats(diffs: np.ndarray, signs: np.ndarray) -> np.ndarray:
    return signs @ diffs / len(diffs)


def paired_permutation_test(
    a: Sequence[float],
    b: Sequence[float],
    tails: str = "one",
    *,
    exact_max_n: int = 20,
    draws: int = 100_000,
    seed: int = 0,
) -> float:
    """Permutation test on paired per-fold scores.

    The null swaps a/b assignments per fold; the statistic is the mean
    difference.  Exact enumeration of all 2^n sign patterns for n <=
    ``exact_max_n``, otherwise ``draws`` Monte Carlo samples (add-one
    estimator, observed assignment counted), so p is never 0.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("paired score vectors must be 1-D and equal length")
    if tails not in ("one", "two"):
        raise ValueError("tails must be 'one' or 'two'")
    n = len(a)
    diffs = a - b
    observed = diffs.mean()
    eps = 1e-12 * max(1.0, abs(observed))
    if n <= exact_max_n:
        bits = (np.arange(2**n)[:, None] >> np.arange(n)) & 1
        signs = 1.0 - 2.0 * bits
        stats = _perm_stats(diffs, signs)
        if tails == "one":
            hits = int((stats >= observed - eps).sum())
        else:
            hits = int((np.abs(stats) >= abs(observed) - eps).sum())
        return hits / 2**n
    rng = _rng(seed, _STREAM_MC, n)
    signs = 1.0 - 2.0 * rng.integers(0, 2, size=(draws, n))
    stats = _perm_stats(diffs, signs)
    if tails == "one":
        hits = int((stats >= observed - eps).sum())
    else:
        hits = int((np.abs(stats) >= abs(observed) - eps).sum())
    return (1 + hits) / (draws + 1)


def significance_matrix(
    fold_scores: dict[str, Sequence[float]],
    alpha: float = 0.05,
) -> dict:
    """Vs-best one-tailed tests plus all-pairs two-tailed tests.

    Returns the best configuration (highest mean, ties by name), the
    one-tailed p of best >= each configuration, the set statistically
    indistinguishable from the best (p > alpha, reflexively including the
    best itself), and the symmetric two-tailed matrix.
    """
    if len(fold_scores) < 2:
        raise ValueError("need at least two configurations to compare")
    names = sorted(fold_scores)
    means = {name: float(np.mean(fold_scores[name])) for name in names}
    best = max(names, key=lambda name: (means[name], name))
    vs_best = {}
    for name in names:
        if name == best:
            vs_best[name] = 1.0
        else:
            vs_best[name] = paired_permutation_test(
                fold_scores[best], fold_scores[name], tails="one"
            )
    indistinguishable = sorted(n for n, p in vs_best.items() if p > alpha)
    pairwise = {}
    for x, y in itertools.combinations(names, 2):
        pairwise[f"{x}|{y}"] = paired_permutation_test(
            fold_scores[x], fold_scores[y], tails="two"
        )
    return {
        "best": best,
        "vs_best_one_tailed": vs_best,
        "indistinguishable_from_best": indistinguishable,
        "pairwise_two_tailed": pairwise,
    }


# --------------------------------------------------------------------------
# Grid execution
# --------------------------------------------------------------------------

@dataclass
class FoldRecord:
    config: str
    fold: int
    f1: float
    mcc: float
    iauc: float
    hyperparam: float | dict[str, float] | None

    def metric(self, name: str) -> float:
        return getattr(self, name)


@dataclass
class EvalReport:
    seed: int
    plan_fingerprint: str
    config_names: list[str]
    config_fingerprints: dict[str, str]
    records: list[FoldRecord]
    means: dict[str, dict[str, float]]
    ranks: dict[str, dict[str, int]]
    rank_products: dict[str, int]
    significance: dict[str, dict]
    failures: dict[str, list[str]]
    audit: dict | None = None

    def fold_scores(self, metric: str) -> dict[str, list[float]]:
        out: dict[str, list[float]] = {}
        for rec in self.records:
            out.setdefault(rec.config, []).append(rec.metric(metric))
        return out


@dataclass
class _RunContext:
    configs: list[RunConfig]
    plan: FoldPlan
    spaces: dict[NgramOrder, FeatureSpace]
    row_of: dict[str, int]
    relevant: np.ndarray  # bool mask aligned with corpus order
    res_counts: dict[str, np.ndarray]
    min_doc_freq: int
    global_vocab_rows: list[int] | None
    audit: bool


def _audit_entry(
    ctx: _RunContext,
    call: str,
    config: str,
    fold: int,
    inner: int | None,
    used_rows: Sequence[int],
    allowed_rows: set[int],
    outer_test_rows: set[int],
) -> dict:
    used = set(used_rows)
    ids_hash = hashlib.sha256(
        ",".join(map(str, sorted(used))).encode()
    ).hexdigest()[:16]
    return {
        "call": call,
        "config": config,
        "fold": fold,
        "inner": inner,
        "n_rows": len(used),
        "outer_test_overlap": len(used & outer_test_rows),
        "outside_allowed": len(used - allowed_rows),
        "ids_hash": ids_hash,
    }


def _eval_split(
    ctx: _RunContext,
    cfg: RunConfig,
    train_rows: list[int],
    test_rows: list[int],
    params: list,
    audit_out: list[dict],
    fold: int,
    inner: int | None,
    outer_test_rows: set[int],
) -> list[tuple[object, np.ndarray | None, str | None]]:
    """Fit the configuration at each grid value on one train/test split.

    Returns (param, test scores, error) triples; a failed grid value
    reports its error instead of scores.
    """
    fs = ctx.spaces[cfg.ngrams]
    allowed = set(train_rows)
    fit_rows = train_rows if ctx.global_vocab_rows is None else ctx.global_vocab_rows
    vocab, col_of = fs.vocabulary(
        train_rows, ctx.min_doc_freq,
        freq_rows=None if ctx.global_vocab_rows is None else ctx.global_vocab_rows,
    )
    if ctx.audit:
        audit_out.append(
            _audit_entry(ctx, "vocabulary", cfg.name, fold, inner,
                         fit_rows, allowed, outer_test_rows)
        )
    Xtr = fs.matrix(train_rows, vocab, col_of)
    Xte = fs.matrix(test_rows, vocab, col_of)
    if cfg.ner_resources:
        Xtr = attach_counts(
            Xtr, {r: ctx.res_counts[r][train_rows] for r in cfg.ner_resources}
        )
        Xte = attach_counts(
            Xte, {r: ctx.res_counts[r][test_rows] for r in cfg.ner_resources}
        )
    if not cfg.transform.is_identity:
        fitted = fit_transform(Xtr, cfg.transform)
        if ctx.audit:
            audit_out.append(
                _audit_entry(ctx, "transform", cfg.name, fold, inner,
                             train_rows, allowed, outer_test_rows)
            )
        Xtr = apply_transform(Xtr, fitted, cfg.transform)
        Xte = apply_transform(Xte, fitted, cfg.transform)
    ytr = ctx.relevant[train_rows]
    results: list[tuple[object, np.ndarray | None, str | None]] = []
    shared = None
    try:
        shared = shared_stats(cfg.classifier, Xtr, ytr)
    except Exception as exc:  # noqa: BLE001 - disqualifies every grid value
        return [(p, None, str(exc)) for p in params]
    for param in params:
        try:
            model = train_classifier(cfg.classifier, Xtr, ytr, param, shared)
        except Exception as exc:  # noqa: BLE001 - grid value disqualified
            results.append((param, None, str(exc)))
            continue
        if ctx.audit:
            audit_out.append(
                _audit_entry(ctx, "train", cfg.name, fold, inner,
                             train_rows, allowed, outer_test_rows)
            )
        results.append((param, model_score(model, Xte), None))
    return results


def _inner_select(
    ctx: _RunContext,
    cfg: RunConfig,
    fold_idx: int,
    grid: list,
    audit_out: list[dict],
    outer_test_rows: set[int],
):
    """Pick the grid value with the highest mean inner-fold MCC; ties take
    the earliest (smallest) value; values failing any fold are out."""
    inner_folds = ctx.plan.inner[fold_idx]
    sums = np.zeros(len(grid))
    alive = [True] * len(grid)
    errors: dict[int, str] = {}
    for j, fold in enumerate(inner_folds):
        tr = [ctx.row_of[i] for i in fold.train_ids]
        te = [ctx.row_of[i] for i in fold.test_ids]
        yte = ctx.relevant[te]
        live_params = [(idx, grid[idx]) for idx in range(len(grid)) if alive[idx]]
        if not live_params:
            break
        outcome = _eval_split(
            ctx, cfg, tr, te, [p for _, p in live_params],
            audit_out, fold_idx, j, outer_test_rows,
        )
        for (idx, _), (param, scores, err) in zip(live_params, outcome):
            if err is not None:
                alive[idx] = False
                errors[idx] = err
                continue
            c = confusion_counts(yte, scores > 0)
            sums[idx] += mcc(c)
    best_idx: int | None = None
    for idx in range(len(grid)):
        if not alive[idx]:
            continue
        if best_idx is None or sums[idx] > sums[best_idx]:
            best_idx = idx
    if best_idx is None:
        details = "; ".join(f"{grid[i]}: {e}" for i, e in sorted(errors.items()))
        raise ValueError(
            f"every hyperparameter value failed inner cross-validation "
            f"({details})"
        )
    return grid[best_idx]


def _run_task(ctx: _RunContext, config_idx: int, fold_idx: int):
    cfg = ctx.configs[config_idx]
    fold = ctx.plan.outer[fold_idx]
    audit_out: list[dict] = []
    tr = [ctx.row_of[i] for i in fold.train_ids]
    te = [ctx.row_of[i] for i in fold.test_ids]
    outer_test_rows = set(te)
    grid = cfg.hyperparam_grid()
    try:
        if grid is None:
            param = None
        elif len(grid) == 1:
            param = grid[0]
        else:
            param = _inner_select(
                ctx, cfg, fold_idx, grid, audit_out, outer_test_rows
            )
        [(_, scores, err)] = _eval_split(
            ctx, cfg, tr, te, [param], audit_out, fold_idx, None, outer_test_rows
        )
        if err is not None:
            raise ValueError(err)
        yte = ctx.relevant[te]
        c = confusion_counts(yte, scores > 0)
        record = FoldRecord(
            config=cfg.name,
            fold=fold_idx,
            f1=f1(c),
            mcc=mcc(c),
            iauc=iauc(scores, yte),
            hyperparam=param,
        )
        return config_idx, fold_idx, record, None, audit_out
    except Exception as exc:  # noqa: BLE001 - recorded as a fold failure
        return config_idx, fold_idx, None, str(exc), audit_out


_WORKER_CTX: _RunContext | None = None


def _worker_init(ctx: _RunContext) -> None:
    global _WORKER_CTX
    _WORKER_CTX = ctx


def _worker_run(task: tuple[int, int]):
    return _run_task(_WORKER_CTX, *task)


def build_run_context(
    corpus: Corpus,
    configs: Sequence[RunConfig],
    plan: FoldPlan,
    *,
    resources: dict[str, Dictionary | NerCountTable] | None = None,
    min_doc_freq: int = 2,
    global_vocab_pruning: bool = False,
    audit: bool = False,
) -> _RunContext:
    configs = list(configs)
    names = [c.name for c in configs]
    if len(set(names)) != len(names):
        raise ValueError(f"duplicate configuration names: {sorted(names)}")
    resources = resources or {}
    needed = {r for c in configs for r in c.ner_resources}
    missing = needed - set(resources)
    if missing:
        raise ValueError(f"NER resources not provided: {sorted(missing)}")
    plan_ids = {i for f in plan.outer for i in f.train_ids + f.test_ids}
    unknown = plan_ids - set(corpus.doc_ids)
    if unknown:
        raise ValueError(f"plan references unknown documents: {sorted(unknown)[:3]}")
    spaces = {
        order: FeatureSpace(corpus, order)
        for order in {c.ngrams for c in configs}
    }
    res_counts = {
        name: resource_count_vector(corpus, resources[name]) for name in needed
    }
    relevant = np.array(
        [d.label is Label.RELEVANT for d in corpus.documents], dtype=bool
    )
    row_of = {doc_id: i for i, doc_id in enumerate(corpus.doc_ids)}
    return _RunContext(
        configs=configs,
        plan=plan,
        spaces=spaces,
        row_of=row_of,
        relevant=relevant,
        res_counts=res_counts,
        min_doc_freq=min_doc_freq,
        global_vocab_rows=(
            sorted(row_of[i] for i in plan_ids) if global_vocab_pruning else None
        ),
        audit=audit,
    )


def run_grid(
    corpus: Corpus,
    configs: Sequence[RunConfig],
    plan: FoldPlan,
    *,
    resources: dict[str, Dictionary | NerCountTable] | None = None,
    min_doc_freq: int = 2,
    global_vocab_pruning: bool = False,
    workers: int = 1,
    audit: bool = False,
) -> EvalReport:
    """Evaluate every configuration on every outer fold of the shared plan."""
    ctx = build_run_context(
        corpus,
        configs,
        plan,
        resources=resources,
        min_doc_freq=min_doc_freq,
        global_vocab_pruning=global_vocab_pruning,
        audit=audit,
    )
    tasks = [
        (ci, fi)
        for ci in range(len(ctx.configs))
        for fi in range(len(plan.outer))
    ]
    results = []
    if workers > 1:
        with ProcessPoolExecutor(
            max_workers=workers, initializer=_worker_init, initargs=(ctx,)
        ) as pool:
            results = list(pool.map(_worker_run, tasks, chunksize=1))
    else:
        results = [_run_task(ctx, ci, fi) for ci, fi in tasks]
    # deterministic reduction regardless of completion order
    results.sort(key=lambda r: (r[0], r[1]))

    records: list[FoldRecord] = []
    failures: dict[str, list[str]] = {}
    audit_entries: list[dict] = []
    for ci, fi, record, error, audit_out in results:
        audit_entries.extend(audit_out)
        name = ctx.configs[ci].name
        if error is not None:
            failures.setdefault(name, []).append(f"fold {fi}: {error}")
        else:
            records.append(record)

    ok_names = [
        c.name for c in ctx.configs if c.name not in failures
    ]
    means: dict[str, dict[str, float]] = {}
    for name in ok_names:
        recs = [r for r in records if r.config == name]
        means[name] = {
            m: float(np.mean([r.metric(m) for r in recs])) for m in _METRICS
        }
    ranks: dict[str, dict[str, int]] = {name: {} for name in ok_names}
    for m in _METRICS:
        col = competition_ranks([means[name][m] for name in ok_names])
        for name, rank in zip(ok_names, col):
            ranks[name][m] = rank
    rank_products = {
        name: rp3(ranks[name]["f1"], ranks[name]["mcc"], ranks[name]["iauc"])
        for name in ok_names
    }
    significance: dict[str, dict] = {}
    if len(ok_names) >= 2:
        for m in _METRICS:
            scores_by_config = {
                name: [r.metric(m) for r in records if r.config == name]
                for name in ok_names
            }
            significance[m] = significance_matrix(scores_by_config)

    audit_summary = None
    if audit:
        violations = [
            e for e in audit_entries
            if e["outer_test_overlap"] > 0 or e["outside_allowed"] > 0
        ]
        audit_summary = {
            "fit_calls": len(audit_entries),
            "violations": len(violations),
            "violating_calls": violations[:20],
        }

    return EvalReport(
        seed=plan.seed,
        plan_fingerprint=plan.fingerprint,
        config_names=[c.name for c in ctx.configs],
        config_fingerprints={c.name: c.fingerprint() for c in ctx.configs},
        records=records,
        means=means,
        ranks=ranks,
        rank_products=rank_products,
        significance=significance,
        failures=failures,
        audit=audit_summary,
    )


def _modal_hyperparam(cfg: RunConfig, records: list[FoldRecord]):
    """Most-frequently selected grid value across folds, ties to the
    earliest grid entry."""
    grid = cfg.hyperparam_grid()
    if grid is None:
        return None
    def key(param):
        return json.dumps(param, sort_keys=True)
    counts: dict[str, int] = {}
    for rec in records:
        counts[key(rec.hyperparam)] = counts.get(key(rec.hyperparam), 0) + 1
    best = None
    best_count = -1
    for param in grid:
        c = counts.get(key(param), 0)
        if c > best_count:
            best, best_count = param, c
    return best


def train_deployment_models(
    ctx: _RunContext, report: EvalReport
) -> dict[str, tuple[TrainedModel, object]]:
    """One model per configuration, trained on the whole corpus with the
    modal inner-CV hyperparameter choice; used for feature analysis and
    scoring new documents, never for the fold-level evaluation."""
    out: dict[str, tuple[TrainedModel, object]] = {}
    for cfg in ctx.configs:
        if cfg.name in report.failures:
            continue
        records = [r for r in report.records if r.config == cfg.name]
        param = _modal_hyperparam(cfg, records)
        fs = ctx.spaces[cfg.ngrams]
        rows = list(range(len(fs.doc_ids)))
        vocab, col_of = fs.vocabulary(rows, ctx.min_doc_freq)
        X = fs.matrix(rows, vocab, col_of)
        if cfg.ner_resources:
            X = attach_counts(
                X, {r: ctx.res_counts[r][rows] for r in cfg.ner_resources}
            )
        if not cfg.transform.is_identity:
            fitted = fit_transform(X, cfg.transform)
            X = apply_transform(X, fitted, cfg.transform)
        model = train_classifier(
            cfg.classifier, X, ctx.relevant[rows], param, None
        )
        out[cfg.name] = (model, vocab)
    return out


# --------------------------------------------------------------------------
# Report files
# --------------------------------------------------------------------------

def _format_hyperparam(param) -> str:
    if param is None:
        return "-"
    if isinstance(param, dict):
        return ";".join(f"{k}={v:g}" for k, v in sorted(param.items()))
    return f"{param:g}"


def write_report(report: EvalReport, outdir: str | Path) -> dict[str, Path]:
    """Write per-fold, summary and significance TSVs plus the JSON bundle.

    The TSV files are byte-stable for a fixed seed; the JSON carries the
    only timestamp.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = {}

    perfold = outdir / "perfold.tsv"
    with open(perfold, "w", encoding="utf-8") as fh:
        fh.write("config\tfold\tf1\tmcc\tiauc\thyperparam\n")
        for rec in sorted(report.records, key=lambda r: (r.config, r.fold)):
            fh.write(
                f"{rec.config}\t{rec.fold}\t{rec.f1:.6f}\t{rec.mcc:.6f}\t"
                f"{rec.iauc:.6f}\t{_format_hyperparam(rec.hyperparam)}\n"
            )
    paths["perfold"] = perfold

    summary = outdir / "summary.tsv"
    order = sorted(
        report.means, key=lambda n: (report.rank_products.get(n, 0), n)
    )
    with open(summary, "w", encoding="utf-8") as fh:
        fh.write(
            "config\tf1_mean\tf1_rank\tmcc_mean\tmcc_rank\t"
            "iauc_mean\tiauc_rank\trp3\n"
        )
        for name in order:
            m, r = report.means[name], report.ranks[name]
            fh.write(
                f"{name}\t{m['f1']:.6f}\t{r['f1']}\t{m['mcc']:.6f}\t{r['mcc']}\t"
                f"{m['iauc']:.6f}\t{r['iauc']}\t{report.rank_products[name]}\n"
            )
    paths["summary"] = summary

    sig = outdir / "significance.tsv"
    with open(sig, "w", encoding="utf-8") as fh:
        fh.write("metric\ttest\tconfig_a\tconfig_b\tp\tindistinguishable\n")
        for metric in sorted(report.significance):
            block = report.significance[metric]
            best = block["best"]
            indist = set(block["indistinguishable_from_best"])
            for name in sorted(block["vs_best_one_tailed"]):
                p = block["vs_best_one_tailed"][name]
                flag = "*" if name in indist else ""
                fh.write(
                    f"{metric}\tvs_best_one_tailed\t{best}\t{name}\t"
                    f"{p:.6g}\t{flag}\n"
                )
            for pair in sorted(block["pairwise_two_tailed"]):
                x, y = pair.split("|")
                p = block["pairwise_two_tailed"][pair]
                fh.write(f"{metric}\tpairwise_two_tailed\t{x}\t{y}\t{p:.6g}\t\n")
    paths["significance"] = sig

    bundle = outdir / "report.json"
    payload = {
        "meta": {
            "package_version": __version__,
            "seed": report.seed,
            "plan_fingerprint": report.plan_fingerprint,
            "config_fingerprints": report.config_fingerprints,
            "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        },
        "config_names": report.config_names,
        "records": [
            {
                "config": r.config,
                "fold": r.fold,
                "f1": r.f1,
                "mcc": r.mcc,
                "iauc": r.iauc,
                "hyperparam": r.hyperparam,
            }
            for r in sorted(report.records, key=lambda r: (r.config, r.fold))
        ],
        "means": report.means,
        "ranks": report.ranks,
        "rank_products": report.rank_products,
        "significance": report.significance,
        "failures": report.failures,
        "audit": report.audit,
    }
    with open(bundle, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")
    paths["bundle"] = bundle
    return paths


def read_report_bundle(path: str | Path) -> dict:
    path = Path(path)
    if path.is_dir():
        path = path / "report.json"
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def compare_reports(
    bundle_a: dict, bundle_b: dict, metric: str = "mcc", tails: str = "two"
) -> dict:
    """Paired permutation tests between every configuration of two runs.

    Both runs must share a fold plan (same corpus, seed and stratification),
    otherwise their per-fold scores are not paired.
    """
    if metric not in _METRICS:
        raise ValueError(f"unknown metric {metric!r}")
    fa = bundle_a["meta"]["plan_fingerprint"]
    fb = bundle_b["meta"]["plan_fingerprint"]
    if fa != fb:
        raise ValueError(
            "reports are not paired: fold-plan fingerprints differ "
            f"({fa[:12]} vs {fb[:12]}); rerun with a shared corpus and seed"
        )

    def scores(bundle: dict) -> dict[str, list[float]]:
        out: dict[str, list[float]] = {}
        for rec in bundle["records"]:
            out.setdefault(rec["config"], []).append(rec[metric])
        return out

    sa, sb = scores(bundle_a), scores(bundle_b)
    cells = {}
    for na in sorted(sa):
        for nb in sorted(sb):
            cells[f"{na}|{nb}"] = paired_permutation_test(
                sa[na], sb[nb], tails=tails
            )
    return {"metric": metric, "tails": tails, "p": cells}
