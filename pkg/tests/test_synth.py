"""Synthetic corpus generator: determinism, class balance, ingestion."""

import numpy as np
import pytest

from pkddi.corpus import Label, build_abstract_corpus, parse_labels, parse_medline
from pkddi.synth import SyntheticSpec, generate, write_corpus


def test_spec_validation():
    with pytest.raises(ValueError, match="positive"):
        SyntheticSpec(documents=0)
    with pytest.raises(ValueError, match="strictly between"):
        SyntheticSpec(class_prior=1.0)
    with pytest.raises(ValueError, match="strictly between"):
        SyntheticSpec(p_signal=0.0)


def test_deterministic_per_seed(tmp_path):
    spec = SyntheticSpec(documents=60, seed=7)
    a = write_corpus(spec, tmp_path / "a")
    b = write_corpus(spec, tmp_path / "b")
    assert a[0].read_bytes() == b[0].read_bytes()
    assert a[1].read_bytes() == b[1].read_bytes()
    c = write_corpus(SyntheticSpec(documents=60, seed=8), tmp_path / "c")
    assert a[0].read_bytes() != c[0].read_bytes()


def test_class_counts_within_binomial_bound():
    spec = SyntheticSpec(documents=1200, class_prior=0.75, seed=3)
    _, labels = generate(spec)
    n_rel = sum(1 for v in labels.values() if v is Label.RELEVANT)
    sigma = np.sqrt(1200 * 0.75 * 0.25)
    assert abs(n_rel - 900) <= 3 * sigma


def test_round_trips_through_ingestion(tmp_path):
    spec = SyntheticSpec(documents=50, seed=11)
    medline_path, labels_path = write_corpus(spec, tmp_path)
    with open(medline_path, encoding="utf-8") as fh:
        records = parse_medline(fh)
    with open(labels_path, encoding="utf-8") as fh:
        labels = parse_labels(fh)
    corpus, dropped = build_abstract_corpus(records, labels)
    assert len(corpus) == 50
    assert dropped == 0
    rel, irr = corpus.class_counts()
    assert rel + irr == 50 and rel > 0 and irr > 0


def test_disjoint_vocabularies_are_separable():
    spec = SyntheticSpec(
        documents=40, relevant_signal=6, irrelevant_signal=6, noise=4,
        p_signal=0.9, p_cross=0.01, p_noise=0.3, seed=13,
    )
    records, labels = generate(spec)
    rel_text = " ".join(
        r.abstract_text for r in records if labels[r.pmid] is Label.RELEVANT
    )
    assert "relmark" in rel_text
