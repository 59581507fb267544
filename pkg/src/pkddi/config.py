"""Declarative experiment configuration (YAML) for the CLI.

One file describes the whole experiment: corpus paths, the configuration
grid, resources, seed and output location.  Only the output directory and
thread count may be overridden by environment variables (PKDDI_OUT,
PKDDI_THREADS); everything else lives in the file so an experiment is
reviewable as a single artifact.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .classifiers import ClassifierKind
from .corpus import Task
from .evaluation import RunConfig
from .featurize import NgramOrder
from .transforms import TransformSpec, Weighting

__all__ = ["ExperimentConfig", "load_experiment_config", "experiment_fingerprint"]

_NGRAM_ALIASES = {
    "unigram": NgramOrder.UNIGRAM,
    "bigram": NgramOrder.UNIGRAM_BIGRAM,
    "unigram+bigram": NgramOrder.UNIGRAM_BIGRAM,
}


@dataclass
class ExperimentConfig:
    task: Task
    seed: int
    output_dir: Path
    configurations: list[RunConfig]
    medline: Path | None = None
    abstracts_tsv: Path | None = None
    labels: Path | None = None
    sentences: Path | None = None
    dictionaries: dict[str, Path] = field(default_factory=dict)
    ner_counts: Path | None = None
    stratify: bool = True
    strict_paper_vocab: bool = False
    min_doc_freq: int = 2
    threads: int | None = None
    raw: dict = field(default_factory=dict)

    def validate_paths(self) -> None:
        paths = [self.medline, self.abstracts_tsv, self.labels, self.sentences,
                 self.ner_counts, *self.dictionaries.values()]
        for p in paths:
            if p is not None and not Path(p).exists():
                raise FileNotFoundError(f"configured path does not exist: {p}")


def _parse_run_config(entry: dict, index: int) -> RunConfig:
    if not isinstance(entry, dict):
        raise ValueError(f"configuration #{index}: expected a mapping")
    unknown = set(entry) - {
        "classifier", "ngrams", "weighting", "l2_normalize",
        "pca_components", "ner_resources", "grid", "label",
    }
    if unknown:
        raise ValueError(f"configuration #{index}: unknown keys {sorted(unknown)}")
    try:
        kind = ClassifierKind(str(entry.get("classifier", "")).lower())
    except ValueError:
        raise ValueError(
            f"configuration #{index}: unknown classifier "
            f"{entry.get('classifier')!r}; valid: "
            f"{[k.value for k in ClassifierKind]}"
        ) from None
    ngrams_key = str(entry.get("ngrams", "unigram")).lower()
    if ngrams_key not in _NGRAM_ALIASES:
        raise ValueError(
            f"configuration #{index}: ngrams must be one of "
            f"{sorted(_NGRAM_ALIASES)}"
        )
    spec = TransformSpec(
        weighting=Weighting(str(entry.get("weighting", "none")).lower()),
        l2_normalize=bool(entry.get("l2_normalize", False)),
        pca_components=entry.get("pca_components"),
    )
    grid = entry.get("grid")
    return RunConfig(
        classifier=kind,
        ngrams=_NGRAM_ALIASES[ngrams_key],
        transform=spec,
        ner_resources=tuple(entry.get("ner_resources", ()) or ()),
        grid=tuple(float(v) for v in grid) if grid is not None else None,
        label=entry.get("label"),
    )


def load_experiment_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict):
        raise ValueError(f"{path}: experiment config must be a mapping")
    try:
        task = Task(str(raw.get("task", "abstract")).lower())
    except ValueError:
        raise ValueError(f"{path}: task must be 'abstract' or 'sentence'") from None
    entries = raw.get("configurations")
    if not entries:
        raise ValueError(f"{path}: at least one configuration is required")
    configs = [_parse_run_config(e, i) for i, e in enumerate(entries)]
    names = [c.name for c in configs]
    if len(set(names)) != len(names):
        raise ValueError(f"{path}: duplicate configuration names {names}")

    corpus = raw.get("corpus") or {}
    base = path.parent

    def resolve(key: str) -> Path | None:
        value = corpus.get(key)
        return (base / value) if value is not None else None

    dictionaries = {
        str(name): base / p for name, p in (raw.get("dictionaries") or {}).items()
    }
    out = raw.get("output_dir", "out")
    env_out = os.environ.get("PKDDI_OUT")
    env_threads = os.environ.get("PKDDI_THREADS")
    cfg = ExperimentConfig(
        task=task,
        seed=int(raw.get("seed", 0)),
        output_dir=Path(env_out) if env_out else base / out,
        configurations=configs,
        medline=resolve("medline"),
        abstracts_tsv=resolve("abstracts_tsv"),
        labels=resolve("labels"),
        sentences=resolve("sentences"),
        dictionaries=dictionaries,
        ner_counts=(base / raw["ner_counts"]) if raw.get("ner_counts") else None,
        stratify=bool(raw.get("stratify", True)),
        strict_paper_vocab=bool(raw.get("strict_paper_vocab", False)),
        min_doc_freq=int(raw.get("min_doc_freq", 2)),
        threads=int(env_threads) if env_threads else raw.get("threads"),
        raw=raw,
    )
    if cfg.task is Task.ABSTRACT:
        if cfg.medline is None and cfg.abstracts_tsv is None:
            raise ValueError(f"{path}: abstract task needs corpus.medline or corpus.abstracts_tsv")
        if cfg.labels is None:
            raise ValueError(f"{path}: abstract task needs corpus.labels")
    else:
        if cfg.sentences is None:
            raise ValueError(f"{path}: sentence task needs corpus.sentences")
    return cfg


def experiment_fingerprint(cfg: ExperimentConfig) -> str:
    """Hash of the resolved experiment, excluding execution details."""
    payload = dict(cfg.raw)
    payload.pop("output_dir", None)
    payload.pop("threads", None)
    return hashlib.sha256(
        json.dumps(payload, sort_keys=True, default=str).encode()
    ).hexdigest()
