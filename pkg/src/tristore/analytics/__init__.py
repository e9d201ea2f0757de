"""Deterministic analytics kernels: NLP chain, topics, graph algorithms,
matrix and collection operators."""

from . import collections_ops, graphalgs, nlp, topics
from .graphalgs import betweenness, collect_word_neighbors, pagerank
from .kernels import backend_name
from .nlp import annotate, filter_stopwords, tokenize_text
from .topics import keyphrase_mining, lda

__all__ = [
    "annotate", "backend_name", "betweenness", "collect_word_neighbors",
    "collections_ops", "filter_stopwords", "graphalgs", "keyphrase_mining",
    "lda", "nlp", "pagerank", "tokenize_text", "topics",
]
