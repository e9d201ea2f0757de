"""Deterministic NLP annotator chain: tokenize, ssplit, pos, lemma, ner.

Tokenization lowercases, strips ``, . ;`` punctuation, and splits on
whitespace.  POS tagging is a dictionary-plus-suffix-rule tagger, lemmas come
from suffix stripping, and NER is a gazetteer lookup over 1..3-gram windows.
Everything is a pure function of its inputs.
"""

from __future__ import annotations

import os
from dataclasses import replace

from ..errors import AnalyticsError, MissingResource
from ..values import Corpus, Document

STAGES = ("tokenize", "ssplit", "pos", "lemma", "ner")

_STRIP = str.maketrans("", "", ",.;")

_POS_DICT = {
    "the": "DT", "a": "DT", "an": "DT", "this": "DT", "that": "DT",
    "he": "PRP", "she": "PRP", "it": "PRP", "they": "PRP", "we": "PRP",
    "i": "PRP", "you": "PRP",
    "in": "IN", "on": "IN", "at": "IN", "of": "IN", "for": "IN", "with": "IN",
    "from": "IN", "by": "IN", "to": "TO",
    "and": "CC", "or": "CC", "but": "CC",
    "is": "VBZ", "are": "VBP", "was": "VBD", "were": "VBD", "be": "VB",
    "has": "VBZ", "have": "VBP", "had": "VBD",
    "not": "RB", "very": "RB",
}

_SUFFIX_RULES = (("ing", "VBG"), ("ed", "VBD"), ("ly", "RB"), ("ous", "JJ"),
                 ("ive", "JJ"), ("al", "JJ"), ("es", "VBZ"), ("s", "NNS"))

_LEMMA_RULES = (("ies", "y"), ("sses", "ss"), ("ing", ""), ("ed", ""), ("es", ""), ("s", ""))


def tokenize_text(text: str) -> list[str]:
    return text.translate(_STRIP).lower().split()


def _pos_tag(token: str) -> str:
    if token in _POS_DICT:
        return _POS_DICT[token]
    if token.isdigit():
        return "CD"
    for suffix, tag in _SUFFIX_RULES:
        if len(token) > len(suffix) + 2 and token.endswith(suffix):
            return tag
    return "NN"


def _lemma(token: str) -> str:
    for suffix, repl in _LEMMA_RULES:
        if len(token) > len(suffix) + 2 and token.endswith(suffix):
            return token[: len(token) - len(suffix)] + repl
    return token


def load_stopwords(path: str) -> list[str]:
    if not os.path.exists(path):
        raise MissingResource(f"stopword file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        return [line.strip() for line in fh if line.strip()]


def load_gazetteer(path: str) -> dict[tuple[str, ...], str]:
    """TSV of (entity phrase, type); keys are tokenized phrases."""
    if not os.path.exists(path):
        raise MissingResource(f"gazetteer file not found: {path}")
    entries: dict[tuple[str, ...], str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line.strip():
                continue
            entity, _, etype = line.partition("\t")
            key = tuple(tokenize_text(entity))
            if key:
                entries[key] = etype.strip() or "ENTITY"
    return entries


def annotate(corpus: Corpus, stage: str, resources: dict | None = None) -> Corpus:
    """Apply one annotator stage to every document; returns a new corpus."""
    if stage not in STAGES:
        raise AnalyticsError(f"unknown annotator stage {stage!r}")
    resources = resources or {}
    return Corpus([annotate_document(d, stage, resources) for d in corpus.docs])


def annotate_document(doc: Document, stage: str, resources: dict) -> Document:
    if stage == "tokenize":
        return replace(doc, tokens=tokenize_text(doc.content))
    if doc.tokens is None:
        raise AnalyticsError(f"stage {stage!r} requires tokenize first")
    if stage == "ssplit":
        spans, start = [], 0
        for part in _sentence_parts(doc.content):
            count = len(tokenize_text(part))
            if count:
                spans.append((start, start + count))
                start += count
        if start < len(doc.tokens):  # stray tokens after the last boundary
            spans.append((start, len(doc.tokens)))
        return replace(doc, sentences=spans)
    if stage == "pos":
        return replace(doc, pos=[_pos_tag(t) for t in doc.tokens])
    if stage == "lemma":
        return replace(doc, lemmas=[_lemma(t) for t in doc.tokens])
    if stage == "ner":
        gaz = resources.get("gazetteer")
        if gaz is None:
            raise MissingResource("ner stage requires a gazetteer resource")
        labels, entities = _ner_scan(doc.tokens, gaz)
        return replace(doc, ner=labels, entities=entities)
    raise AnalyticsError(f"unknown annotator stage {stage!r}")


def _sentence_parts(text: str) -> list[str]:
    parts, buf = [], []
    for ch in text:
        buf.append(ch)
        if ch in ".!?":
            parts.append("".join(buf))
            buf = []
    if buf:
        parts.append("".join(buf))
    return parts


def _ner_scan(tokens: list[str], gaz: dict[tuple[str, ...], str]):
    labels = ["O"] * len(tokens)
    entities: list[tuple[str, str]] = []
    i, n = 0, len(tokens)
    while i < n:
        hit = None
        for width in (3, 2, 1):  # greedy longest match
            if i + width <= n:
                key = tuple(tokens[i:i + width])
                if key in gaz:
                    hit = (width, gaz[key])
                    break
        if hit is None:
            i += 1
            continue
        width, etype = hit
        entities.append((etype, " ".join(tokens[i:i + width])))
        for j in range(i, i + width):
            labels[j] = etype
        i += width
    return labels, entities


def extract_entities(corpus: Corpus) -> list[tuple[str, str]]:
    """Distinct (type, entity) pairs over an annotated corpus, in first-seen order."""
    seen: dict[tuple[str, str], None] = {}
    for doc in corpus.docs:
        for pair in doc.entities or []:
            seen.setdefault(pair, None)
    return list(seen)


def filter_stopwords(corpus: Corpus, stopwords: list[str]) -> Corpus:
    stop = set(stopwords)
    docs = []
    for doc in corpus.docs:
        if doc.tokens is None:
            raise AnalyticsError("filter_stopwords requires a tokenized corpus")
        docs.append(replace(doc, tokens=[t for t in doc.tokens if t not in stop]))
    return Corpus(docs)
