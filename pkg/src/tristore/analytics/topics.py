"""Topic modelling and keyphrase mining over tokenized corpora."""

from __future__ import annotations

import math

import numpy as np

from ..errors import EmptyCorpus, InvalidK
from ..values import Corpus, Matrix
from . import kernels

LDA_ITERATIONS = 200
LDA_ALPHA = 0.1
LDA_BETA = 0.01


def _encode(corpus: Corpus) -> tuple[list[list[int]], list[str], list[int]]:
    """Token ids in first-occurrence order; skips untokenized empties."""
    vocab: dict[str, int] = {}
    docs: list[list[int]] = []
    doc_ids: list[int] = []
    for doc in corpus.docs:
        ids = []
        for tok in doc.tokens or []:
            if tok not in vocab:
                vocab[tok] = len(vocab)
            ids.append(vocab[tok])
        docs.append(ids)
        doc_ids.append(doc.doc_id)
    return docs, list(vocab), doc_ids


def lda(corpus: Corpus, topics: int, num_keywords: int = 1000,
        seed: int = 7, iterations: int = LDA_ITERATIONS) -> tuple[Matrix, Matrix]:
    """Seeded collapsed-Gibbs LDA.

    Returns (DTM, WTM): DTM rows keyed by doc id and normalized to sum 1;
    WTM rows keyed by word, each topic column truncated to its
    ``num_keywords`` strongest words (other entries zeroed).
    """
    if topics < 1:
        raise InvalidK(f"topic count must be >= 1, got {topics}")
    if len(corpus.docs) == 0:
        raise EmptyCorpus("lda requires a non-empty corpus")
    docs, vocab, doc_ids = _encode(corpus)
    if not vocab:
        raise EmptyCorpus("lda requires at least one token")

    ndk, nwk, nk = kernels.lda_gibbs(docs, len(vocab), topics, iterations,
                                     LDA_ALPHA, LDA_BETA, seed)

    dtm = np.asarray(ndk, dtype=np.float64) + LDA_ALPHA
    dtm /= dtm.sum(axis=1, keepdims=True)

    wtm = np.asarray(nwk, dtype=np.float64) + LDA_BETA
    wtm /= np.asarray(nk, dtype=np.float64) + len(vocab) * LDA_BETA
    if num_keywords < len(vocab):
        for t in range(topics):
            col = wtm[:, t]
            # stable top-k: ties resolved toward the lower word index
            order = np.lexsort((np.arange(len(col)), -col))
            col[order[num_keywords:]] = 0.0
    return (Matrix(dtm, row_keys=doc_ids, col_keys=list(range(topics))),
            Matrix(wtm, row_keys=vocab, col_keys=list(range(topics))))


def keyphrase_mining(corpus: Corpus, k: int) -> list[str]:
    """Top-k unigrams by tf-idf (corpus-total tf, ln(N/df) idf); ties break
    lexicographically."""
    if k < 1:
        raise InvalidK(f"keyphrase count must be >= 1, got {k}")
    n_docs = len(corpus.docs)
    if n_docs == 0:
        return []
    tf: dict[str, int] = {}
    df: dict[str, int] = {}
    for doc in corpus.docs:
        toks = doc.tokens or []
        for t in toks:
            tf[t] = tf.get(t, 0) + 1
        for t in set(toks):
            df[t] = df.get(t, 0) + 1
    scored = sorted(tf, key=lambda t: (-(tf[t] * math.log(n_docs / df[t])), t))
    return scored[:k]
