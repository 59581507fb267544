"""Corpus ingestion: MEDLINE records, labels, sentence corpora, dictionaries,
and precomputed named-entity count tables.

Parsers are single-pass; the resulting record types are immutable and safe
to share between threads.  All inputs are UTF-8 text with LF or CRLF line
endings.
"""

from __future__ import annotations

import enum
import io
import re
from dataclasses import dataclass, field
from typing import Iterable, TextIO

__all__ = [
    "AbstractRecord",
    "SentenceRecord",
    "Label",
    "Dictionary",
    "NerCountTable",
    "Document",
    "Corpus",
    "Task",
    "CorpusError",
    "parse_medline",
    "parse_abstracts_tsv",
    "parse_labels",
    "parse_sentences",
    "load_dictionary",
    "load_ner_counts",
    "build_abstract_corpus",
    "build_sentence_corpus",
    "write_medline",
    "write_abstracts_tsv",
    "write_labels",
    "write_sentences",
]


class CorpusError(ValueError):
    """Raised for malformed corpus inputs; message carries file position."""


class Label(enum.Enum):
    RELEVANT = "relevant"
    IRRELEVANT = "irrelevant"


class Task(enum.Enum):
    ABSTRACT = "abstract"
    SENTENCE = "sentence"


@dataclass(frozen=True)
class AbstractRecord:
    """One PubMed record: title/abstract text plus the five metadata fields."""

    pmid: str
    title: str = ""
    abstract_text: str = ""
    authors: tuple[str, ...] = ()
    journal: str = ""
    mesh_terms: tuple[str, ...] = ()
    rn_substances: tuple[str, ...] = ()
    si_substances: tuple[str, ...] = ()

    @property
    def doc_id(self) -> str:
        return self.pmid


@dataclass(frozen=True)
class SentenceRecord:
    pmid: str
    index: int
    text: str

    @property
    def doc_id(self) -> str:
        return f"{self.pmid}:{self.index}"


@dataclass(frozen=True)
class Dictionary:
    """Named term list; entries are case-folded and deduplicated."""

    name: str
    entries: frozenset[str]


@dataclass(frozen=True)
class NerCountTable:
    """Per-document entity counts from one external NER resource."""

    resource: str
    counts: dict[str, int]

    def count_for(self, doc_id: str) -> int:
        return self.counts.get(doc_id, 0)


@dataclass(frozen=True)
class Document:
    doc_id: str
    label: Label
    record: AbstractRecord | SentenceRecord


@dataclass(frozen=True)
class Corpus:
    task: Task
    documents: tuple[Document, ...]

    def __post_init__(self) -> None:
        ids = [d.doc_id for d in self.documents]
        if len(set(ids)) != len(ids):
            raise CorpusError("duplicate document ids in corpus")

    def __len__(self) -> int:
        return len(self.documents)

    @property
    def doc_ids(self) -> tuple[str, ...]:
        return tuple(d.doc_id for d in self.documents)

    @property
    def labels(self) -> dict[str, Label]:
        return {d.doc_id: d.label for d in self.documents}

    def class_counts(self) -> tuple[int, int]:
        rel = sum(1 for d in self.documents if d.label is Label.RELEVANT)
        return rel, len(self.documents) - rel


# --------------------------------------------------------------------------
# MEDLINE tagged format
# --------------------------------------------------------------------------

_TAG_RE = re.compile(r"^([A-Z][A-Z0-9]{1,3})\s*- (.*)$")

_LIST_TAGS = {"AU", "MH", "RN", "SI"}
_KNOWN_TAGS = {"PMID", "TI", "AB", "TA", "JT"} | _LIST_TAGS


def _is_continuation(line: str) -> bool:
    # at least 4 leading spaces and no "TAG - " prefix
    return line.startswith("    ") and not _TAG_RE.match(line.lstrip())


def parse_medline(stream: TextIO | str, strict: bool = False) -> list[AbstractRecord]:
    """Parse MEDLINE tagged text into one record per PMID.

    Records are blank-line separated; continuation lines (indented by at
    least 4 spaces, no tag prefix) are joined to the previous value with a
    single space.  Unknown tags are ignored unless ``strict`` is set.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)

    records: list[AbstractRecord] = []
    seen: set[str] = set()
    fields: dict[str, list[str]] = {}
    offset = 0
    record_offset = 0
    last_tag: str | None = None
    in_record = False

    def flush() -> None:
        nonlocal fields, last_tag, in_record
        if not in_record:
            return
        if "PMID" not in fields:
            raise CorpusError(
                f"malformed MEDLINE record at byte offset {record_offset}: no PMID"
            )
        pmid = fields["PMID"][0]
        if pmid in seen:
            raise CorpusError(f"duplicate PMID {pmid!r}")
        seen.add(pmid)
        journal = fields.get("TA", fields.get("JT", [""]))[0]
        records.append(
            AbstractRecord(
                pmid=pmid,
                title=" ".join(fields.get("TI", [])) or "",
                abstract_text=" ".join(fields.get("AB", [])) or "",
                authors=tuple(fields.get("AU", [])),
                journal=journal,
                mesh_terms=tuple(fields.get("MH", [])),
                rn_substances=tuple(fields.get("RN", [])),
                si_substances=tuple(fields.get("SI", [])),
            )
        )
        fields = {}
        last_tag = None
        in_record = False

    for raw in stream:
        line = raw.rstrip("\r\n")
        if not line.strip():
            flush()
            offset += len(raw.encode("utf-8"))
            continue
        if not in_record:
            record_offset = offset
            in_record = True
        m = _TAG_RE.match(line)
        if m:
            tag, value = m.group(1), m.group(2)
            if tag in _KNOWN_TAGS:
                fields.setdefault(tag, []).append(value)
                last_tag = tag
            else:
                if strict:
                    raise CorpusError(
                        f"unknown MEDLINE tag {tag!r} at byte offset {offset}"
                    )
                last_tag = None
        elif _is_continuation(line):
            if last_tag is not None and fields.get(last_tag):
                fields[last_tag][-1] += " " + line.strip()
        else:
            if strict:
                raise CorpusError(
                    f"unparseable MEDLINE line at byte offset {offset}: {line!r}"
                )
        offset += len(raw.encode("utf-8"))
    flush()
    return records


def write_medline(records: Iterable[AbstractRecord], stream: TextIO) -> None:
    """Serialize records to canonical MEDLINE (round-trips via parse_medline)."""
    for rec in records:
        stream.write(f"PMID- {rec.pmid}\n")
        if rec.title:
            stream.write(f"TI  - {rec.title}\n")
        if rec.abstract_text:
            stream.write(f"AB  - {rec.abstract_text}\n")
        for author in rec.authors:
            stream.write(f"AU  - {author}\n")
        if rec.journal:
            stream.write(f"TA  - {rec.journal}\n")
        for term in rec.mesh_terms:
            stream.write(f"MH  - {term}\n")
        for sub in rec.rn_substances:
            stream.write(f"RN  - {sub}\n")
        for sub in rec.si_substances:
            stream.write(f"SI  - {sub}\n")
        stream.write("\n")


# --------------------------------------------------------------------------
# TSV formats
# --------------------------------------------------------------------------

_ABSTRACT_TSV_COLUMNS = (
    "pmid", "title", "abstract", "authors", "journal", "mesh", "rn", "si",
)


def parse_abstracts_tsv(stream: TextIO | str) -> list[AbstractRecord]:
    """Alternative abstract-corpus format: one TSV row per record.

    Columns: pmid, title, abstract, authors, journal, mesh, rn, si; the
    list-valued columns separate items with '|'.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    records = []
    seen: set[str] = set()
    for lineno, raw in enumerate(stream, start=1):
        line = raw.rstrip("\r\n")
        if not line or line.startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) != len(_ABSTRACT_TSV_COLUMNS):
            raise CorpusError(
                f"abstract TSV line {lineno}: expected "
                f"{len(_ABSTRACT_TSV_COLUMNS)} columns, got {len(cols)}"
            )
        pmid, title, abstract, authors, journal, mesh, rn, si = cols
        if not pmid:
            raise CorpusError(f"abstract TSV line {lineno}: empty pmid")
        if pmid in seen:
            raise CorpusError(f"abstract TSV line {lineno}: duplicate PMID {pmid!r}")
        seen.add(pmid)

        def split(v: str) -> tuple[str, ...]:
            return tuple(x for x in v.split("|") if x)

        records.append(
            AbstractRecord(
                pmid=pmid,
                title=title,
                abstract_text=abstract,
                authors=split(authors),
                journal=journal,
                mesh_terms=split(mesh),
                rn_substances=split(rn),
                si_substances=split(si),
            )
        )
    return records


def write_abstracts_tsv(records: Iterable[AbstractRecord], stream: TextIO) -> None:
    for rec in records:
        row = (
            rec.pmid,
            rec.title,
            rec.abstract_text,
            "|".join(rec.authors),
            rec.journal,
            "|".join(rec.mesh_terms),
            "|".join(rec.rn_substances),
            "|".join(rec.si_substances),
        )
        stream.write("\t".join(row) + "\n")


def parse_labels(stream: TextIO | str) -> dict[str, Label]:
    """Parse a two-column TSV of document id and relevant/irrelevant label."""
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    labels: dict[str, Label] = {}
    for lineno, raw in enumerate(stream, start=1):
        line = raw.rstrip("\r\n")
        if not line or line.startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) != 2:
            raise CorpusError(f"labels line {lineno}: expected 2 columns")
        doc_id, token = cols[0], cols[1].strip().lower()
        try:
            label = Label(token)
        except ValueError:
            raise CorpusError(
                f"labels line {lineno}: unknown label {cols[1]!r}"
            ) from None
        if doc_id in labels and labels[doc_id] is not label:
            raise CorpusError(
                f"labels line {lineno}: conflicting label for id {doc_id!r}"
            )
        labels[doc_id] = label
    return labels


def write_labels(labels: dict[str, Label], stream: TextIO) -> None:
    for doc_id in labels:
        stream.write(f"{doc_id}\t{labels[doc_id].value}\n")


def parse_sentences(stream: TextIO | str) -> list[tuple[SentenceRecord, Label]]:
    """Parse the sentence corpus TSV: pmid, index, label, text."""
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    out: list[tuple[SentenceRecord, Label]] = []
    seen: set[tuple[str, int]] = set()
    for lineno, raw in enumerate(stream, start=1):
        line = raw.rstrip("\r\n")
        if not line or line.startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) != 4:
            raise CorpusError(f"sentences line {lineno}: expected 4 columns")
        pmid, index_s, token, text = cols
        try:
            index = int(index_s)
        except ValueError:
            raise CorpusError(
                f"sentences line {lineno}: non-integer index {index_s!r}"
            ) from None
        if index < 0:
            raise CorpusError(f"sentences line {lineno}: negative index")
        try:
            label = Label(token.strip().lower())
        except ValueError:
            raise CorpusError(
                f"sentences line {lineno}: unknown label {token!r}"
            ) from None
        key = (pmid, index)
        if key in seen:
            raise CorpusError(
                f"sentences line {lineno}: duplicate sentence {pmid}:{index}"
            )
        seen.add(key)
        out.append((SentenceRecord(pmid=pmid, index=index, text=text), label))
    return out


def write_sentences(
    pairs: Iterable[tuple[SentenceRecord, Label]], stream: TextIO
) -> None:
    for rec, label in pairs:
        stream.write(f"{rec.pmid}\t{rec.index}\t{label.value}\t{rec.text}\n")


def load_dictionary(stream: TextIO | str, name: str) -> Dictionary:
    """Load a one-term-per-line dictionary; '#' comments and blanks skipped."""
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    entries = set()
    for raw in stream:
        line = raw.rstrip("\r\n").strip()
        if not line or line.startswith("#"):
            continue
        entries.add(line.casefold())
    if not entries:
        raise CorpusError(f"dictionary {name!r} is empty after filtering")
    return Dictionary(name=name, entries=frozenset(entries))


def load_ner_counts(stream: TextIO | str) -> dict[str, NerCountTable]:
    """Parse a TSV of (doc id, resource name, count) into per-resource tables."""
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    tables: dict[str, dict[str, int]] = {}
    for lineno, raw in enumerate(stream, start=1):
        line = raw.rstrip("\r\n")
        if not line or line.startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) != 3:
            raise CorpusError(f"NER counts line {lineno}: expected 3 columns")
        doc_id, resource, count_s = cols
        try:
            count = int(count_s)
        except ValueError:
            raise CorpusError(
                f"NER counts line {lineno}: non-integer count {count_s!r}"
            ) from None
        if count < 0:
            raise CorpusError(f"NER counts line {lineno}: negative count")
        table = tables.setdefault(resource, {})
        if doc_id in table:
            raise CorpusError(
                f"NER counts line {lineno}: duplicate entry for "
                f"doc {doc_id!r}, resource {resource!r}"
            )
        table[doc_id] = count
    return {
        name: NerCountTable(resource=name, counts=counts)
        for name, counts in tables.items()
    }


# --------------------------------------------------------------------------
# Corpus assembly
# --------------------------------------------------------------------------

def build_abstract_corpus(
    records: Iterable[AbstractRecord], labels: dict[str, Label]
) -> tuple[Corpus, int]:
    """Join records with the authoritative label file.

    Records without a label are dropped; returns the corpus and the dropped
    count.  Labels without a matching record are an error.
    """
    records = list(records)
    present = {r.pmid for r in records}
    missing = sorted(set(labels) - present)
    if missing:
        raise CorpusError(
            f"{len(missing)} labeled ids missing from the record set "
            f"(first: {missing[0]!r})"
        )
    docs = []
    dropped = 0
    for rec in records:
        label = labels.get(rec.pmid)
        if label is None:
            dropped += 1
            continue
        docs.append(Document(doc_id=rec.pmid, label=label, record=rec))
    if not docs:
        raise CorpusError("no labeled documents in corpus")
    return Corpus(task=Task.ABSTRACT, documents=tuple(docs)), dropped


def build_sentence_corpus(
    pairs: Iterable[tuple[SentenceRecord, Label]]
) -> Corpus:
    docs = tuple(
        Document(doc_id=rec.doc_id, label=label, record=rec)
        for rec, label in pairs
    )
    if not docs:
        raise CorpusError("no sentences in corpus")
    return Corpus(task=Task.SENTENCE, documents=docs)
