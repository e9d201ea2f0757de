"""Embedded text engine: per-field inverted index with boolean retrieval.

Ranking is term-match count descending, then doc id ascending; determinism
over ranking fidelity.
"""

from __future__ import annotations

from typing import Callable, Optional

from ..ast_nodes import Param
from ..errors import UnknownField, UnsupportedSyntax
from ..querylang import SolrQuery, parse_dynamic_solr_clauses
from ..values import Corpus, Document
from ..analytics.nlp import tokenize_text


class TextEngine:
    def __init__(self, alias: str, fields: list[str]):
        self.alias = alias
        self.fields = list(fields)
        # field -> term -> sorted posting list of doc ids
        self.index: dict[str, dict[str, list[int]]] = {f: {} for f in fields}
        self.docs: dict[int, dict[str, str]] = {}

    def add_document(self, doc_id: int, fields: dict[str, str]):
        self.docs[doc_id] = dict(fields)
        for fname, text in fields.items():
            if fname not in self.index:
                raise UnknownField(f"field {fname!r} not declared on {self.alias}")
            for term in set(tokenize_text(text)):
                postings = self.index[fname].setdefault(term, [])
                postings.append(doc_id)
        for postings in self.index.values():
            for lst in postings.values():
                lst.sort()

    def execute(self, q: SolrQuery,
                param_value: Callable[[Param], object]) -> Corpus:
        groups = q.groups
        if groups is None:
            if q.dynamic is None:
                raise UnsupportedSyntax("empty text query")
            groups = parse_dynamic_solr_clauses(str(param_value(q.dynamic)))
        # check fields up front so unknown fields fail loudly
        clauses = [c for grp in groups for c in grp]
        for c in clauses:
            if c.field not in self.index:
                raise UnknownField(f"unknown field {c.field!r} on {self.alias}")

        matched: dict[int, int] = {}
        distinct = {(c.field, c.term.lower()) for c in clauses}
        for doc_id in self.docs:
            hit_any = False
            for grp in groups:
                if all(self._doc_has(doc_id, c.field, c.term) for c in grp):
                    hit_any = True
                    break
            if not hit_any:
                continue
            score = sum(1 for fld, term in distinct if self._doc_has(doc_id, fld, term))
            matched[doc_id] = score

        ranked = sorted(matched, key=lambda d: (-matched[d], d))
        if q.rows is not None:
            ranked = ranked[:q.rows]
        docs = []
        for doc_id in ranked:
            fields = self.docs[doc_id]
            content = fields.get(self.fields[0], next(iter(fields.values()), ""))
            docs.append(Document(doc_id, content, fields=dict(fields)))
        return Corpus(docs)

    def _doc_has(self, doc_id: int, field: str, term: str) -> bool:
        postings = self.index[field].get(term.lower(), [])
        # postings are sorted and small at desk scale; linear check is fine
        return doc_id in postings
