"""Synthetic two-class corpus generator for desk-scale pipeline checks.

Documents are bags of letter-only tokens drawn from three pools: tokens
characteristic of the relevant class, tokens characteristic of the
irrelevant class, and shared noise.  Output is MEDLINE plus a label file,
so the generated corpus exercises the same ingestion path as real data.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import AbstractRecord, Label
from .stem import porter_stem

__all__ = ["SyntheticSpec", "generate", "write_corpus"]

_STREAM_SYNTH = 4

# letter pairs that survive stemming without collisions
_SUFFIX_ALPHABET = "bcdfghkmnpqrtvwxz"


@dataclass(frozen=True)
class SyntheticSpec:
    documents: int = 1200
    relevant_signal: int = 50
    irrelevant_signal: int = 50
    noise: int = 500
    class_prior: float = 0.75  # probability of the relevant class
    p_signal: float = 0.35  # own-class signal token emission
    p_cross: float = 0.02  # other-class signal token emission
    p_noise: float = 0.08  # shared noise token emission
    seed: int = 0

    def __post_init__(self) -> None:
        if min(self.documents, self.relevant_signal, self.irrelevant_signal, self.noise) <= 0:
            raise ValueError("counts must be positive")
        for name in ("class_prior", "p_signal", "p_cross", "p_noise"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must lie strictly between 0 and 1")


def _token_pool(prefix: str, count: int) -> list[str]:
    base = len(_SUFFIX_ALPHABET)
    tokens = []
    i = 0
    while len(tokens) < count:
        suffix = ""
        v = i
        for _ in range(3):
            suffix += _SUFFIX_ALPHABET[v % base]
            v //= base
        tokens.append(prefix + suffix)
        i += 1
    stems = {porter_stem(t) for t in tokens}
    if len(stems) != len(tokens):
        raise AssertionError("token pool collides after stemming")
    return tokens


def generate(spec: SyntheticSpec) -> tuple[list[AbstractRecord], dict[str, Label]]:
    rng = np.random.default_rng(
        np.random.SeedSequence(entropy=spec.seed, spawn_key=(_STREAM_SYNTH,))
    )
    rel_pool = _token_pool("relmark", spec.relevant_signal)
    irr_pool = _token_pool("irrmark", spec.irrelevant_signal)
    noise_pool = _token_pool("fillterm", spec.noise)

    records = []
    labels: dict[str, Label] = {}
    for d in range(spec.documents):
        relevant = bool(rng.random() < spec.class_prior)
        own, other = (rel_pool, irr_pool) if relevant else (irr_pool, rel_pool)
        bag = [t for t in own if rng.random() < spec.p_signal]
        bag += [t for t in other if rng.random() < spec.p_cross]
        bag += [t for t in noise_pool if rng.random() < spec.p_noise]
        rng.shuffle(bag)
        if len(bag) < 4:  # degenerate draw; keep the record non-empty
            bag += list(rng.choice(noise_pool, size=4 - len(bag), replace=False))
        pmid = f"S{d:05d}"
        title = " ".join(bag[:3])
        body = " ".join(bag[3:])
        records.append(
            AbstractRecord(pmid=pmid, title=title, abstract_text=body)
        )
        labels[pmid] = Label.RELEVANT if relevant else Label.IRRELEVANT
    return records, labels


def write_corpus(
    spec: SyntheticSpec, outdir: str | Path
) -> tuple[Path, Path]:
    """Emit medline.txt and labels.tsv; byte-identical for equal specs."""
    from .corpus import write_labels, write_medline

    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    records, labels = generate(spec)
    medline_path = outdir / "medline.txt"
    labels_path = outdir / "labels.tsv"
    with open(medline_path, "w", encoding="utf-8") as fh:
        write_medline(records, fh)
    with open(labels_path, "w", encoding="utf-8") as fh:
        write_labels(labels, fh)
    return medline_path, labels_path
