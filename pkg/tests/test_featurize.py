"""Tokenization, vocabulary construction, occurrence matrices, counts."""

import io

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from pkddi.corpus import (
    AbstractRecord,
    Dictionary,
    Document,
    Label,
    SentenceRecord,
)
from pkddi.featurize import (
    FeatureSpace,
    NgramOrder,
    SourceField,
    attach_counts,
    build_vocabulary,
    detach_counts,
    dictionary_counts,
    document_feature_keys,
    export_matrix_tsv,
    export_vocabulary_tsv,
    metadata_tokens,
    occurrence_matrix,
    tokenize,
    tokenize_document,
)


def surfaces(text):
    return [t.surface for t in tokenize(text)]


class TestTokenize:
    def test_stemming(self):
        assert surfaces("increased") == ["increas"]
        assert surfaces("Drug interactions increased.") == ["drug", "interact", "increas"]

    def test_digit_masking_with_interior_punctuation(self):
        assert surfaces("3.4-fold") == ["#.#-fold"]
        assert surfaces("a 3.4 ratio") == ["#.#", "ratio"]

    def test_standalone_numbers_dropped_after_masking(self):
        # "50" -> "#" which is too short to keep
        assert surfaces("a 50 mg dose") == ["mg", "dose"]

    def test_letter_adjacent_digits_survive(self):
        assert surfaces("CYP3A4 with p450") == ["cyp3a4", "with", "p450"]

    def test_hyphen_between_alphanumerics(self):
        assert surfaces("co-administered") == ["co-administ"]
        assert "co-administ" in surfaces("A co-administered drug")

    def test_short_tokens_dropped(self):
        assert surfaces("a b cd") == ["cd"]

    def test_empty(self):
        assert surfaces("") == []
        assert surfaces("   .. !! ") == []

    @given(st.text(max_size=200))
    @settings(max_examples=200, deadline=None)
    def test_total_on_arbitrary_text(self, text):
        for tok in tokenize(text):
            assert len(tok.surface) >= 2
            assert tok.surface == tok.surface.lower()


class TestMetadataTokens:
    def test_field_prefixes(self):
        rec = AbstractRecord(
            pmid="1",
            mesh_terms=("Drug Interactions",),
            rn_substances=("0 (Enzyme Inhibitors)",),
            si_substances=("GENBANK/AF113673",),
            authors=("Neuvonen PJ",),
            journal="Clin Pharmacol Ther",
        )
        toks = {t.surface for t in metadata_tokens(rec)}
        assert "MeSH:Drug Interactions" in toks
        assert "Substance:Enzyme Inhibitors" in toks
        assert "Substance:GENBANK/AF113673" in toks
        assert "Author:Neuvonen PJ" in toks
        assert "Journal:Clin Pharmacol Ther" in toks

    def test_mesh_star_stripped_and_not_stemmed(self):
        rec = AbstractRecord(pmid="1", mesh_terms=("*Midazolam/pharmacokinetics",))
        toks = [t.surface for t in metadata_tokens(rec)]
        assert toks == ["MeSH:Midazolam/pharmacokinetics"]

    def test_empty_metadata(self):
        assert metadata_tokens(AbstractRecord(pmid="1")) == []


def _doc(pmid, title="", abstract="", label=Label.RELEVANT, **meta):
    rec = AbstractRecord(pmid=pmid, title=title, abstract_text=abstract, **meta)
    return Document(doc_id=pmid, label=label, record=rec)


def _sdoc(pmid, index, text, label=Label.RELEVANT):
    rec = SentenceRecord(pmid=pmid, index=index, text=text)
    return Document(doc_id=rec.doc_id, label=label, record=rec)


class TestVocabulary:
    def test_doc_freq_pruning(self):
        docs = [
            tokenize_document(_doc("1", abstract="auc increased")),
            tokenize_document(_doc("2", abstract="auc decreased")),
            tokenize_document(_doc("3", abstract="nothing")),
        ]
        vocab = build_vocabulary(docs, NgramOrder.UNIGRAM, min_doc_freq=2)
        assert vocab.features == ("auc",)
        assert vocab.doc_freq.tolist() == [1 + 1]

    def test_bigrams_within_segment(self):
        docs = [
            tokenize_document(_doc("1", abstract="interact between drugs")),
            tokenize_document(_doc("2", abstract="interact between agents")),
        ]
        vocab = build_vocabulary(docs, NgramOrder.UNIGRAM_BIGRAM, min_doc_freq=2)
        assert "interact between" in vocab.features
        assert "interact" in vocab.features

    def test_no_bigram_across_title_abstract_boundary(self):
        docs = [
            tokenize_document(_doc(str(i), title="alpha", abstract="bravo charlie"))
            for i in range(2)
        ]
        vocab = build_vocabulary(docs, NgramOrder.UNIGRAM_BIGRAM, min_doc_freq=2)
        assert "alpha bravo" not in vocab.features
        assert "bravo charli" in vocab.features

    def test_metadata_never_forms_bigrams(self):
        docs = [
            tokenize_document(
                _doc(str(i), abstract="text here",
                     mesh_terms=("Drug Interactions", "Kinetics"))
            )
            for i in range(2)
        ]
        vocab = build_vocabulary(docs, NgramOrder.UNIGRAM_BIGRAM, min_doc_freq=2)
        assert "MeSH:Drug Interactions" in vocab.features
        joined = "MeSH:Drug Interactions MeSH:Kinetics"
        assert joined not in vocab.features

    def test_lexicographic_order(self):
        docs = [
            tokenize_document(_doc(str(i), abstract="zebra auc milk"))
            for i in range(2)
        ]
        vocab = build_vocabulary(docs, NgramOrder.UNIGRAM, min_doc_freq=2)
        assert list(vocab.features) == sorted(vocab.features)

    def test_empty_vocabulary_is_error(self):
        docs = [tokenize_document(_doc("1", abstract="unique tokens only"))]
        with pytest.raises(ValueError, match="empty vocabulary"):
            build_vocabulary(docs, NgramOrder.UNIGRAM, min_doc_freq=2)

    def test_monotone_under_corpus_growth(self):
        base = [
            tokenize_document(_doc(str(i), abstract="auc increased"))
            for i in range(2)
        ]
        vocab = build_vocabulary(base, NgramOrder.UNIGRAM, min_doc_freq=2)
        grown = base + [tokenize_document(_doc("9", abstract="other text"))]
        vocab2 = build_vocabulary(grown, NgramOrder.UNIGRAM, min_doc_freq=2)
        assert set(vocab.features) <= set(vocab2.features)


class TestOccurrenceMatrix:
    def _corpus(self):
        docs = [
            _doc("1", abstract="auc increased strongly"),
            _doc("2", abstract="auc decreased"),
            _doc("3", abstract="plasma auc auc auc"),
        ]
        tdocs = [tokenize_document(d) for d in docs]
        vocab = build_vocabulary(tdocs, NgramOrder.UNIGRAM, min_doc_freq=2)
        m = occurrence_matrix(tdocs, [d.doc_id for d in docs], vocab, NgramOrder.UNIGRAM)
        return vocab, m

    def test_binary_even_for_repeats(self):
        vocab, m = self._corpus()
        dense = m.dense()
        assert set(np.unique(dense)) <= {0.0, 1.0}
        col = vocab.index["auc"]
        assert dense[2, col] == 1.0

    def test_oov_ignored(self):
        vocab, m = self._corpus()
        tdoc = tokenize_document(_doc("9", abstract="entirely novel tokens auc"))
        m2 = occurrence_matrix([tdoc], ["9"], vocab, NgramOrder.UNIGRAM)
        assert m2.dense().sum() == 1.0  # only "auc" is in vocabulary

    def test_all_zero_row(self):
        vocab, m = self._corpus()
        tdoc = tokenize_document(_doc("9", abstract="nothing shared"))
        m2 = occurrence_matrix([tdoc], ["9"], vocab, NgramOrder.UNIGRAM)
        assert m2.dense().sum() == 0.0

    def test_determinism(self):
        v1, m1 = self._corpus()
        v2, m2 = self._corpus()
        assert v1.features == v2.features
        assert (m1.dense() == m2.dense()).all()


class TestFeatureSpace:
    def _corpus(self):
        from pkddi.corpus import Corpus, Task

        docs = (
            _doc("1", abstract="auc increased strongly"),
            _doc("2", abstract="auc decreased", label=Label.IRRELEVANT),
            _doc("3", abstract="plasma auc increased"),
        )
        return Corpus(task=Task.ABSTRACT, documents=docs)

    def test_matches_direct_construction(self):
        corpus = self._corpus()
        fs = FeatureSpace(corpus, NgramOrder.UNIGRAM)
        vocab, col_of = fs.vocabulary([0, 1, 2], min_doc_freq=2)
        m = fs.matrix([0, 1, 2], vocab, col_of)

        tdocs = [tokenize_document(d) for d in corpus.documents]
        vocab2 = build_vocabulary(tdocs, NgramOrder.UNIGRAM, min_doc_freq=2)
        m2 = occurrence_matrix(tdocs, corpus.doc_ids, vocab2, NgramOrder.UNIGRAM)
        assert vocab.features == vocab2.features
        assert (vocab.doc_freq == vocab2.doc_freq).all()
        assert (m.dense() == m2.dense()).all()

    def test_training_rows_only(self):
        corpus = self._corpus()
        fs = FeatureSpace(corpus, NgramOrder.UNIGRAM)
        vocab, _ = fs.vocabulary([0, 2], min_doc_freq=2)
        # "increased" appears in rows 0 and 2; "decreased" only in row 1
        assert "increas" in vocab.features
        assert "decreas" not in vocab.features

    def test_global_freq_rows_switch(self):
        corpus = self._corpus()
        fs = FeatureSpace(corpus, NgramOrder.UNIGRAM)
        vocab, _ = fs.vocabulary([0], min_doc_freq=2, freq_rows=[0, 1, 2])
        assert "auc" in vocab.features and "increas" in vocab.features


class TestDictionaryCounts:
    def test_case_insensitive_word_boundary(self):
        d = Dictionary(name="drugs", entries=frozenset({"ketoconazole"}))
        text = "Ketoconazole inhibited ketoconazole clearance"
        assert dictionary_counts(text, d) == 2

    def test_word_boundary_blocks_substrings(self):
        d = Dictionary(name="d", entries=frozenset({"drug"}))
        assert dictionary_counts("drugstore drug", d) == 1

    def test_longest_match_first_non_overlapping(self):
        d = Dictionary(name="d", entries=frozenset({"st john", "st john's wort"}))
        assert dictionary_counts("took st john's wort daily", d) == 1

    def test_empty_text(self):
        d = Dictionary(name="d", entries=frozenset({"x1"}))
        assert dictionary_counts("", d) == 0


class TestAttachCounts:
    def _matrix(self):
        docs = [_doc("1", abstract="auc up"), _doc("2", abstract="auc down")]
        tdocs = [tokenize_document(d) for d in docs]
        vocab = build_vocabulary(tdocs, NgramOrder.UNIGRAM, min_doc_freq=2)
        return occurrence_matrix(tdocs, ["1", "2"], vocab, NgramOrder.UNIGRAM)

    def test_attach_appends_columns(self):
        m = self._matrix()
        m2 = attach_counts(m, {"BICEPP": np.array([3.0, 0.0])})
        assert m2.extras_matrix().shape == (2, 1)
        assert m2.augmented().shape == (2, m.n_features + 1)

    def test_attach_then_detach_is_identity(self):
        m = self._matrix()
        m2 = detach_counts(attach_counts(m, {"B": np.array([1.0, 2.0])}))
        assert (m2.dense() == m.dense()).all()
        assert m2.extras == {}

    def test_duplicate_resource_rejected(self):
        m = attach_counts(self._matrix(), {"B": np.array([1.0, 2.0])})
        with pytest.raises(ValueError, match="duplicate resource"):
            attach_counts(m, {"B": np.array([0.0, 0.0])})

    def test_negative_counts_rejected(self):
        with pytest.raises(ValueError, match="negative"):
            attach_counts(self._matrix(), {"B": np.array([-1.0, 0.0])})


def test_exports_round_readable():
    docs = [_doc("1", abstract="auc up"), _doc("2", abstract="auc down")]
    tdocs = [tokenize_document(d) for d in docs]
    vocab = build_vocabulary(tdocs, NgramOrder.UNIGRAM, min_doc_freq=2)
    m = occurrence_matrix(tdocs, ["1", "2"], vocab, NgramOrder.UNIGRAM)
    m = attach_counts(m, {"B": np.array([5.0, 0.0])})
    buf = io.StringIO()
    export_matrix_tsv(m, buf)
    lines = buf.getvalue().splitlines()
    assert "1\tauc\t1" in lines
    assert "1\tB\t5" in lines
    buf2 = io.StringIO()
    export_vocabulary_tsv(vocab, buf2)
    assert buf2.getvalue().splitlines()[0] == "0\tauc\t2"


def test_sentence_documents_single_segment():
    tdoc = tokenize_document(_sdoc("7", 0, "AUC increased 3.4-fold"))
    assert len(tdoc) == 1
    assert tdoc[0].source_field is SourceField.SENTENCE_TEXT
    keys = document_feature_keys(tdoc, NgramOrder.UNIGRAM_BIGRAM)
    assert "auc" in keys and "#.#-fold" in keys
    assert "increas #.#-fold" in keys
