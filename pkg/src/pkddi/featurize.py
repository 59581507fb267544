"""Featurization: stemmed n-gram occurrence matrices plus count features.

Text fields are lowercased, split on whitespace/punctuation (hyphens and
periods survive between alphanumerics), digit runs not touching a letter
become '#', short tokens are dropped, and alphabetic tokens are
Porter-stemmed.  Metadata values (authors, journal, MeSH, substances)
become single prefixed tokens and never participate in bigrams.  Matrices
are binary at construction; transforms make them real-valued later.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Iterable, Sequence, TextIO

import numpy as np
import scipy.sparse as sp

from .corpus import (
    AbstractRecord,
    Corpus,
    Dictionary,
    Document,
    NerCountTable,
    SentenceRecord,
)
from .stem import porter_stem

__all__ = [
    "SourceField",
    "Token",
    "NgramOrder",
    "Vocabulary",
    "FeatureMatrix",
    "FeatureSpace",
    "tokenize",
    "metadata_tokens",
    "tokenize_document",
    "document_feature_keys",
    "build_vocabulary",
    "occurrence_matrix",
    "dictionary_counts",
    "attach_counts",
    "detach_counts",
    "resource_count_vector",
    "export_matrix_tsv",
    "export_vocabulary_tsv",
]


class SourceField(enum.Enum):
    TITLE = "title"
    ABSTRACT = "abstract"
    SENTENCE_TEXT = "sentence"
    AUTHOR = "author"
    JOURNAL = "journal"
    MESH = "mesh"
    RN = "rn"
    SI = "si"


_TEXT_FIELDS = {SourceField.TITLE, SourceField.ABSTRACT, SourceField.SENTENCE_TEXT}

_METADATA_PREFIX = {
    SourceField.AUTHOR: "Author:",
    SourceField.JOURNAL: "Journal:",
    SourceField.MESH: "MeSH:",
    SourceField.RN: "Substance:",
    SourceField.SI: "Substance:",
}


@dataclass(frozen=True)
class Token:
    surface: str
    source_field: SourceField


class NgramOrder(enum.Enum):
    UNIGRAM = "unigram"
    UNIGRAM_BIGRAM = "bigram"

    @property
    def uses_bigrams(self) -> bool:
        return self is NgramOrder.UNIGRAM_BIGRAM


# raw token: alphanumeric runs glued by single '-' or '.' between alphanumerics
_RAW_TOKEN_RE = re.compile(r"[^\W_]+(?:[-.][^\W_]+)*")
# a maximal digit run is masked only when no letter touches it directly
_DIGIT_RUN_RE = re.compile(r"(?<![^\W_])\d+(?![^\W_])")


def _normalize_word(raw: str) -> str | None:
    word = _DIGIT_RUN_RE.sub("#", raw)
    if len(word) < 2:
        return None
    # every kept token is stemmed; Porter's rules only strip letter
    # suffixes, so digit- or '#'-bearing tails pass through unchanged
    # while hyphenated words still reduce ("co-administered" -> "co-administ")
    return porter_stem(word)


def tokenize(text: str, source_field: SourceField = SourceField.ABSTRACT) -> list[Token]:
    """Tokenize free text into normalized, stemmed tokens."""
    tokens = []
    for raw in _RAW_TOKEN_RE.findall(text.lower()):
        word = _normalize_word(raw)
        if word is not None:
            tokens.append(Token(surface=word, source_field=source_field))
    return tokens


_RN_NAME_RE = re.compile(r"\(([^()]+)\)\s*$")


def _substance_name(value: str) -> str:
    # registry-number values carry the substance name in a trailing "(...)"
    m = _RN_NAME_RE.search(value)
    return m.group(1) if m else value


def metadata_tokens(record: AbstractRecord) -> list[Token]:
    """One unsplit, unstemmed token per metadata field value."""
    tokens = []
    for author in record.authors:
        tokens.append(Token(_METADATA_PREFIX[SourceField.AUTHOR] + author, SourceField.AUTHOR))
    if record.journal:
        tokens.append(Token(_METADATA_PREFIX[SourceField.JOURNAL] + record.journal, SourceField.JOURNAL))
    for term in record.mesh_terms:
        term = term.replace("*", "")  # major-topic markers
        tokens.append(Token(_METADATA_PREFIX[SourceField.MESH] + term, SourceField.MESH))
    for sub in record.rn_substances:
        tokens.append(Token(_METADATA_PREFIX[SourceField.RN] + _substance_name(sub), SourceField.RN))
    for sub in record.si_substances:
        tokens.append(Token(_METADATA_PREFIX[SourceField.SI] + sub, SourceField.SI))
    return tokens


@dataclass(frozen=True)
class Segment:
    """A run of tokens from one source field; bigrams never cross segments."""

    source_field: SourceField
    tokens: tuple[str, ...]
    bigrams_allowed: bool


TokenizedDoc = tuple[Segment, ...]


def tokenize_document(doc: Document) -> TokenizedDoc:
    rec = doc.record
    segments: list[Segment] = []
    if isinstance(rec, SentenceRecord):
        toks = tuple(t.surface for t in tokenize(rec.text, SourceField.SENTENCE_TEXT))
        segments.append(Segment(SourceField.SENTENCE_TEXT, toks, True))
    else:
        title = tuple(t.surface for t in tokenize(rec.title, SourceField.TITLE))
        body = tuple(t.surface for t in tokenize(rec.abstract_text, SourceField.ABSTRACT))
        if title:
            segments.append(Segment(SourceField.TITLE, title, True))
        if body:
            segments.append(Segment(SourceField.ABSTRACT, body, True))
        by_field: dict[SourceField, list[str]] = {}
        for tok in metadata_tokens(rec):
            by_field.setdefault(tok.source_field, []).append(tok.surface)
        for fld, surfaces in by_field.items():
            segments.append(Segment(fld, tuple(surfaces), False))
    return tuple(segments)


def document_feature_keys(tdoc: TokenizedDoc, order: NgramOrder) -> set[str]:
    """The set of unigram (and bigram) feature keys present in a document."""
    keys: set[str] = set()
    for seg in tdoc:
        keys.update(seg.tokens)
        if order.uses_bigrams and seg.bigrams_allowed:
            keys.update(
                f"{a} {b}" for a, b in zip(seg.tokens, seg.tokens[1:])
            )
    return keys


@dataclass(frozen=True)
class Vocabulary:
    """Ordered feature keys with their training document frequencies."""

    features: tuple[str, ...]
    doc_freq: np.ndarray  # int64, aligned with features

    def __post_init__(self) -> None:
        if len(self.features) == 0:
            raise ValueError("empty vocabulary")
        if len(self.features) != len(self.doc_freq):
            raise ValueError("doc_freq length mismatch")

    def __len__(self) -> int:
        return len(self.features)

    @property
    def index(self) -> dict[str, int]:
        return {k: i for i, k in enumerate(self.features)}

    def content_hash(self) -> str:
        import hashlib

        h = hashlib.sha256()
        for k in self.features:
            h.update(k.encode("utf-8"))
            h.update(b"\x00")
        return h.hexdigest()


@dataclass(frozen=True)
class FeatureMatrix:
    """Documents x features matrix plus optional per-resource count columns.

    ``data`` is a binary CSR matrix at construction; transforms may replace
    it with real-valued sparse or dense arrays.  ``extras`` keeps count
    columns separate from the textual block so transforms can pass them
    through untouched.
    """

    row_ids: tuple[str, ...]
    data: sp.csr_matrix | np.ndarray
    vocab: Vocabulary | None
    extras: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def n_rows(self) -> int:
        return self.data.shape[0]

    @property
    def n_features(self) -> int:
        return self.data.shape[1]

    def is_binary(self) -> bool:
        values = self.data.data if sp.issparse(self.data) else np.asarray(self.data)
        return bool(np.isin(values, (0.0, 1.0)).all())

    def dense(self) -> np.ndarray:
        return self.data.toarray() if sp.issparse(self.data) else np.asarray(self.data)

    def with_data(self, data) -> "FeatureMatrix":
        return replace(self, data=data)

    def extras_matrix(self) -> np.ndarray:
        """Count columns in insertion order as a dense (n, R) array."""
        if not self.extras:
            return np.zeros((self.n_rows, 0))
        return np.column_stack([self.extras[k] for k in self.extras])

    def augmented(self) -> sp.csr_matrix | np.ndarray:
        """Textual block with count columns appended (for covariance-aware
        classifiers that treat counts like any other feature)."""
        if not self.extras:
            return self.data
        extra = self.extras_matrix()
        if sp.issparse(self.data):
            return sp.hstack([self.data, sp.csr_matrix(extra)], format="csr")
        return np.hstack([self.dense(), extra])


def build_vocabulary(
    docs: Sequence[TokenizedDoc],
    order: NgramOrder,
    min_doc_freq: int = 2,
) -> Vocabulary:
    """Collect features from training documents, pruning rare ones.

    Feature order is lexicographic, which makes vocabulary construction
    deterministic for a fixed corpus.
    """
    counts: dict[str, int] = {}
    for tdoc in docs:
        for key in document_feature_keys(tdoc, order):
            counts[key] = counts.get(key, 0) + 1
    features = sorted(k for k, c in counts.items() if c >= min_doc_freq)
    if not features:
        raise ValueError(
            f"empty vocabulary after pruning features with doc_freq < {min_doc_freq}"
        )
    freq = np.array([counts[k] for k in features], dtype=np.int64)
    return Vocabulary(features=tuple(features), doc_freq=freq)


def occurrence_matrix(
    docs: Sequence[TokenizedDoc],
    row_ids: Sequence[str],
    vocab: Vocabulary,
    order: NgramOrder,
) -> FeatureMatrix:
    """Binary occurrence matrix over a fixed vocabulary; out-of-vocabulary
    features are ignored."""
    index = vocab.index
    indptr = [0]
    indices: list[int] = []
    for tdoc in docs:
        cols = sorted(
            index[k] for k in document_feature_keys(tdoc, order) if k in index
        )
        indices.extend(cols)
        indptr.append(len(indices))
    data = np.ones(len(indices), dtype=np.float64)
    X = sp.csr_matrix(
        (data, np.array(indices, dtype=np.int32), np.array(indptr, dtype=np.int64)),
        shape=(len(docs), len(vocab)),
    )
    return FeatureMatrix(row_ids=tuple(row_ids), data=X, vocab=vocab)


class FeatureSpace:
    """Pre-encoded corpus features for fast per-fold vocabulary/matrix builds.

    Every distinct key in the corpus gets a global integer id (lexicographic
    order, so any subset keeps the lexicographic vocabulary order).  Folds
    then build vocabularies by doc-frequency counting over training rows and
    matrices by remapping the per-document id arrays.
    """

    def __init__(self, corpus: Corpus, order: NgramOrder):
        self.order = order
        self.doc_ids = corpus.doc_ids
        self.row_of = {doc_id: i for i, doc_id in enumerate(self.doc_ids)}
        key_sets = [
            document_feature_keys(tokenize_document(doc), order)
            for doc in corpus.documents
        ]
        all_keys = sorted(set().union(*key_sets)) if key_sets else []
        self.keys = np.array(all_keys, dtype=object)
        key_id = {k: i for i, k in enumerate(all_keys)}
        self.doc_keys = [
            np.array(sorted(key_id[k] for k in ks), dtype=np.int64)
            for ks in key_sets
        ]

    def global_doc_freq(self, rows: Sequence[int]) -> np.ndarray:
        counts = np.zeros(len(self.keys), dtype=np.int64)
        for r in rows:
            counts[self.doc_keys[r]] += 1
        return counts

    def vocabulary(
        self, train_rows: Sequence[int], min_doc_freq: int = 2,
        freq_rows: Sequence[int] | None = None,
    ) -> tuple[Vocabulary, np.ndarray]:
        """Vocabulary over training rows plus the global-id -> column map.

        ``freq_rows`` overrides the rows used for doc-frequency pruning (the
        corpus-global reproduction mode); occurrence counting for the matrix
        is unaffected.
        """
        counts = self.global_doc_freq(
            train_rows if freq_rows is None else freq_rows
        )
        keep = counts >= min_doc_freq
        if not keep.any():
            raise ValueError(
                f"empty vocabulary after pruning features with doc_freq < {min_doc_freq}"
            )
        col_of = np.full(len(self.keys), -1, dtype=np.int64)
        col_of[keep] = np.arange(int(keep.sum()))
        vocab = Vocabulary(
            features=tuple(self.keys[keep]),
            doc_freq=counts[keep],
        )
        return vocab, col_of

    def matrix(
        self, rows: Sequence[int], vocab: Vocabulary, col_of: np.ndarray
    ) -> FeatureMatrix:
        indptr = np.zeros(len(rows) + 1, dtype=np.int64)
        chunks = []
        for i, r in enumerate(rows):
            cols = col_of[self.doc_keys[r]]
            cols = cols[cols >= 0]
            chunks.append(cols)
            indptr[i + 1] = indptr[i] + len(cols)
        indices = np.concatenate(chunks) if chunks else np.zeros(0, dtype=np.int64)
        X = sp.csr_matrix(
            (np.ones(len(indices)), indices.astype(np.int32), indptr),
            shape=(len(rows), len(vocab)),
        )
        return FeatureMatrix(
            row_ids=tuple(self.doc_ids[r] for r in rows), data=X, vocab=vocab
        )


# --------------------------------------------------------------------------
# Dictionary and NER count features
# --------------------------------------------------------------------------

@lru_cache(maxsize=64)
def _dictionary_pattern(entries: frozenset[str]) -> re.Pattern:
    # longest-first alternation makes the leftmost match the longest one
    ordered = sorted(entries, key=lambda e: (-len(e), e))
    return re.compile(
        r"\b(?:" + "|".join(re.escape(e) for e in ordered) + r")\b",
        re.IGNORECASE,
    )


def dictionary_counts(doc_text: str, dictionary: Dictionary) -> int:
    """Count non-overlapping, word-boundary, case-insensitive entry matches."""
    if not doc_text:
        return 0
    return len(_dictionary_pattern(dictionary.entries).findall(doc_text))


def document_raw_text(doc: Document) -> str:
    rec = doc.record
    if isinstance(rec, SentenceRecord):
        return rec.text
    if rec.title and rec.abstract_text:
        return rec.title + " " + rec.abstract_text
    return rec.title or rec.abstract_text


def resource_count_vector(
    corpus: Corpus, resource: Dictionary | NerCountTable
) -> np.ndarray:
    """Per-document counts for one resource, aligned with corpus order."""
    if isinstance(resource, Dictionary):
        return np.array(
            [dictionary_counts(document_raw_text(d), resource) for d in corpus.documents],
            dtype=np.float64,
        )
    return np.array(
        [resource.count_for(d.doc_id) for d in corpus.documents], dtype=np.float64
    )


def attach_counts(
    m: FeatureMatrix, counts: dict[str, np.ndarray]
) -> FeatureMatrix:
    """Append one count column per resource after the textual features."""
    extras = dict(m.extras)
    for name, values in counts.items():
        if name in extras:
            raise ValueError(f"duplicate resource name {name!r}")
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (m.n_rows,):
            raise ValueError(
                f"resource {name!r}: expected {m.n_rows} counts, got {values.shape}"
            )
        if (values < 0).any():
            raise ValueError(f"resource {name!r}: negative counts")
        extras[name] = values
    return replace(m, extras=extras)


def detach_counts(m: FeatureMatrix, names: Iterable[str] | None = None) -> FeatureMatrix:
    if names is None:
        return replace(m, extras={})
    names = set(names)
    return replace(m, extras={k: v for k, v in m.extras.items() if k not in names})


# --------------------------------------------------------------------------
# Inspection exports
# --------------------------------------------------------------------------

def export_matrix_tsv(m: FeatureMatrix, stream: TextIO) -> None:
    """Sparse triplet export: row_id, feature_key, value."""
    X = m.data.tocoo() if sp.issparse(m.data) else sp.coo_matrix(m.data)
    features = m.vocab.features if m.vocab is not None else None
    order = np.lexsort((X.col, X.row))
    for i in order:
        r, c, v = X.row[i], X.col[i], X.data[i]
        key = features[c] if features is not None else str(c)
        stream.write(f"{m.row_ids[r]}\t{key}\t{v:g}\n")
    for name, values in m.extras.items():
        for r, v in enumerate(values):
            stream.write(f"{m.row_ids[r]}\t{name}\t{v:g}\n")


def export_vocabulary_tsv(vocab: Vocabulary, stream: TextIO) -> None:
    for i, key in enumerate(vocab.features):
        stream.write(f"{i}\t{key}\t{vocab.doc_freq[i]}\n")
