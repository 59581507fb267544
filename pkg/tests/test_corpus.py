"""Parsers, corpus assembly, and round-trip serialization."""

import io

import pytest

from pkddi.corpus import (
    AbstractRecord,
    CorpusError,
    Label,
    build_abstract_corpus,
    build_sentence_corpus,
    load_dictionary,
    load_ner_counts,
    parse_abstracts_tsv,
    parse_labels,
    parse_medline,
    parse_sentences,
    write_abstracts_tsv,
    write_labels,
    write_medline,
    write_sentences,
)

MEDLINE_SAMPLE = """\
PMID- 1
TI  - A study.
AB  - Body.

PMID- 2
TI  - Interaction of ketoconazole
      and midazolam.
AB  - Plasma AUC increased 3.4-fold.
AU  - Neuvonen PJ
AU  - Olkkola KT
TA  - Clin Pharmacol Ther
MH  - Drug Interactions
MH  - *Midazolam/pharmacokinetics
RN  - 0 (Enzyme Inhibitors)
SI  - GENBANK/AF113673
"""


def test_parse_medline_basic_fields():
    records = parse_medline(MEDLINE_SAMPLE)
    assert len(records) == 2
    first = records[0]
    assert first.pmid == "1"
    assert first.title == "A study."
    assert first.abstract_text == "Body."
    assert first.authors == ()


def test_parse_medline_lists_and_continuation():
    records = parse_medline(MEDLINE_SAMPLE)
    rec = records[1]
    assert rec.title == "Interaction of ketoconazole and midazolam."
    assert rec.authors == ("Neuvonen PJ", "Olkkola KT")
    assert rec.journal == "Clin Pharmacol Ther"
    assert rec.mesh_terms == ("Drug Interactions", "*Midazolam/pharmacokinetics")
    assert rec.rn_substances == ("0 (Enzyme Inhibitors)",)
    assert rec.si_substances == ("GENBANK/AF113673",)


def test_parse_medline_jt_fallback():
    records = parse_medline("PMID- 9\nJT  - The Journal\n")
    assert records[0].journal == "The Journal"
    records = parse_medline("PMID- 9\nTA  - Abbrev\nJT  - The Journal\n")
    assert records[0].journal == "Abbrev"


def test_parse_medline_missing_pmid_names_offset():
    text = "PMID- 1\nTI  - ok\n\nTI  - no id here\n"
    # the malformed record starts right after the 18-byte first record
    with pytest.raises(CorpusError, match=r"byte offset 18"):
        parse_medline(text)


def test_parse_medline_duplicate_pmid():
    with pytest.raises(CorpusError, match="duplicate PMID"):
        parse_medline("PMID- 1\n\nPMID- 1\n")


def test_parse_medline_strict_rejects_unknown_tags():
    text = "PMID- 1\nXX  - whatever\n"
    assert parse_medline(text)[0].pmid == "1"
    with pytest.raises(CorpusError, match="unknown MEDLINE tag"):
        parse_medline(text, strict=True)


def test_parse_medline_crlf():
    records = parse_medline("PMID- 1\r\nTI  - Title\r\n\r\n")
    assert records[0].title == "Title"


def test_medline_round_trip():
    records = parse_medline(MEDLINE_SAMPLE)
    buf = io.StringIO()
    write_medline(records, buf)
    assert parse_medline(buf.getvalue()) == records


def test_abstracts_tsv_round_trip():
    records = parse_medline(MEDLINE_SAMPLE)
    buf = io.StringIO()
    write_abstracts_tsv(records, buf)
    assert parse_abstracts_tsv(buf.getvalue()) == records


def test_parse_labels():
    labels = parse_labels("1\trelevant\n2\tirrelevant\n")
    assert labels == {"1": Label.RELEVANT, "2": Label.IRRELEVANT}


def test_parse_labels_case_insensitive_and_duplicates():
    labels = parse_labels("1\tRelevant\n1\trelevant\n")
    assert labels == {"1": Label.RELEVANT}
    with pytest.raises(CorpusError, match="line 2"):
        parse_labels("1\trelevant\n1\tirrelevant\n")
    with pytest.raises(CorpusError, match="unknown label"):
        parse_labels("1\tmaybe\n")


def test_labels_round_trip():
    labels = parse_labels("1\trelevant\n2\tirrelevant\n")
    buf = io.StringIO()
    write_labels(labels, buf)
    assert parse_labels(buf.getvalue()) == labels


def test_parse_sentences():
    pairs = parse_sentences("7\t0\trelevant\tAUC rose.\n7\t1\tirrelevant\tMethods.\n")
    assert len(pairs) == 2
    rec, label = pairs[0]
    assert (rec.pmid, rec.index, rec.text) == ("7", 0, "AUC rose.")
    assert label is Label.RELEVANT
    assert rec.doc_id == "7:0"


def test_parse_sentences_errors():
    with pytest.raises(CorpusError, match="non-integer index"):
        parse_sentences("7\tx\trelevant\ttext\n")
    with pytest.raises(CorpusError, match="duplicate sentence"):
        parse_sentences("7\t0\trelevant\ta\n7\t0\trelevant\tb\n")


def test_sentences_round_trip():
    pairs = parse_sentences("7\t0\trelevant\tAUC rose.\n7\t1\tirrelevant\tMethods.\n")
    buf = io.StringIO()
    write_sentences(pairs, buf)
    assert parse_sentences(buf.getvalue()) == pairs


def test_load_dictionary_case_folds_and_dedups():
    d = load_dictionary("ketoconazole\nKetoconazole\n# comment\n\nitraconazole\n", "drugs")
    assert d.entries == frozenset({"ketoconazole", "itraconazole"})
    with pytest.raises(CorpusError, match="empty"):
        load_dictionary("# nothing\n", "empty")


def test_load_ner_counts():
    tables = load_ner_counts("1\tBICEPP\t3\n2\tBICEPP\t0\n1\tOSCAR4\t7\n")
    assert tables["BICEPP"].count_for("1") == 3
    assert tables["BICEPP"].count_for("absent") == 0
    assert tables["OSCAR4"].count_for("1") == 7
    with pytest.raises(CorpusError, match="negative"):
        load_ner_counts("1\tBICEPP\t-1\n")
    with pytest.raises(CorpusError, match="duplicate"):
        load_ner_counts("1\tBICEPP\t1\n1\tBICEPP\t2\n")


def test_build_abstract_corpus_label_file_is_authoritative():
    records = parse_medline(MEDLINE_SAMPLE)
    labels = {"1": Label.RELEVANT}
    corpus, dropped = build_abstract_corpus(records, labels)
    assert len(corpus) == 1 and dropped == 1
    assert corpus.documents[0].label is Label.RELEVANT
    # label ids must resolve
    with pytest.raises(CorpusError, match="missing from the record set"):
        build_abstract_corpus(records, {"1": Label.RELEVANT, "99": Label.IRRELEVANT})


def test_label_partition_covers_corpus():
    records = parse_medline(MEDLINE_SAMPLE)
    labels = {"1": Label.RELEVANT, "2": Label.IRRELEVANT}
    corpus, dropped = build_abstract_corpus(records, labels)
    rel, irr = corpus.class_counts()
    assert rel + irr == len(corpus) == 2
    assert dropped == 0


def test_sentence_corpus_duplicate_ids_rejected():
    rec_pairs = parse_sentences("7\t0\trelevant\ta\n8\t0\tirrelevant\tb\n")
    corpus = build_sentence_corpus(rec_pairs)
    assert corpus.doc_ids == ("7:0", "8:0")
