"""pkddi: literature mining for pharmacokinetic drug-interaction evidence.

Corpus ingestion (MEDLINE and TSV), stemmed unigram/bigram occurrence
matrices, feature transforms, six linear classifiers, nested
cross-validated evaluation with permutation significance tests, and
feature-weight analysis, behind both a library API and the ``pkddi`` CLI.
"""

__version__ = "0.1.0"
