"""System catalog: engine descriptors, schemas, and the function catalog.

The catalog file is a line-oriented declarative format, one ``instance``
block per engine::

    instance News {
      model = relational;
      locality = served;
      fixed_latency_ms = 2;
      per_row_latency_us = 5;
      table newspaper (id:Integer, news:String, src:String) from "newspaper.csv";
    }

Graph instances use ``label``/``edgelabel`` entries for node/edge schema-like
info and instance-level ``nodes``/``edges`` keys for bulk-load CSV paths; text
instances use ``field`` entries with a JSON-lines load path.  Unknown keys are
errors.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

from . import semtypes as st
from .errors import (AmbiguousOverload, CatalogParseError, DuplicateAlias,
                     NegativeLatency, NoMatchingOverload, UnknownAlias,
                     UnknownFunction, UnknownModelKind)

MODELS = ("relational", "graph", "text")
LOCALITIES = ("embedded", "served")
ENTRY_KEYWORDS = {"table": "relational", "field": "text",
                  "label": "graph", "edgelabel": "graph"}


@dataclass
class SchemaEntry:
    name: str
    columns: dict[str, str]          # name -> primitive type, ordered
    kind: str = "table"              # table | label | edgelabel | field
    load_path: Optional[str] = None

    def __post_init__(self):
        if len(set(self.columns)) != len(self.columns):
            raise CatalogParseError(f"duplicate column in entry {self.name}")


@dataclass
class EngineDescriptor:
    alias: str
    model: str
    locality: str
    served_fixed_latency_ms: int = 0
    served_per_row_latency_us: int = 0
    schema_entries: list[SchemaEntry] = field(default_factory=list)
    nodes_path: Optional[str] = None
    edges_path: Optional[str] = None

    def __post_init__(self):
        if self.model not in MODELS:
            raise UnknownModelKind(f"unknown model kind: {self.model}")
        if self.served_fixed_latency_ms < 0 or self.served_per_row_latency_us < 0:
            raise NegativeLatency(f"negative latency on instance {self.alias}")
        if self.locality == "embedded" and (
                self.served_fixed_latency_ms or self.served_per_row_latency_us):
            raise CatalogParseError(
                f"embedded instance {self.alias} must have zero latencies")

    def entry(self, name: str) -> Optional[SchemaEntry]:
        for e in self.schema_entries:
            if e.name == name:
                return e
        return None

    def entries(self, kind: str) -> list[SchemaEntry]:
        return [e for e in self.schema_entries if e.kind == kind]


REQUIRED = object()


@dataclass
class FunctionSignature:
    name: str
    positional_params: list[st.SemanticType]
    named_params: dict[str, tuple[st.SemanticType, object]]  # name -> (type, default or REQUIRED)
    returns: list[st.SemanticType]
    logical_kind: str = ""
    decomposition: Optional[list[str]] = None
    reserved: bool = False  # query/store keywords handled at parse level

    def __post_init__(self):
        if len(self.returns) < 1:
            raise CatalogParseError(f"function {self.name} must return at least one value")

    def matches(self, arg_types: list[st.SemanticType]) -> bool:
        if len(arg_types) != len(self.positional_params):
            return False
        return all(_param_matches(p, a)
                   for p, a in zip(self.positional_params, arg_types))


ANY = st.SemanticType("Any")


def _param_matches(param: st.SemanticType, arg: st.SemanticType) -> bool:
    if param == ANY:
        return True
    if param.kind == "List" and arg.kind == "List":
        return _param_matches(param.elem, arg.elem)
    return st.assignable(param, arg)


@dataclass
class SystemCatalog:
    instances: dict[str, EngineDescriptor] = field(default_factory=dict)
    functions: dict[tuple[str, int], list[FunctionSignature]] = field(default_factory=dict)

    def add_instance(self, desc: EngineDescriptor):
        if desc.alias in self.instances:
            raise DuplicateAlias(f"duplicate instance alias: {desc.alias}")
        self.instances[desc.alias] = desc

    def add_function(self, sig: FunctionSignature):
        self.functions.setdefault((sig.name, len(sig.positional_params)), []).append(sig)

    def lookup_engine(self, alias: str) -> EngineDescriptor:
        if alias not in self.instances:
            raise UnknownAlias(f"unknown engine alias: {alias}")
        return self.instances[alias]

    def lookup_function(self, name: str,
                        arg_types: list[st.SemanticType]) -> FunctionSignature:
        sigs = self.functions.get((name, len(arg_types)))
        if sigs is None:
            if any(key[0] == name for key in self.functions):
                raise NoMatchingOverload(
                    f"no overload of {name} takes {len(arg_types)} positional arguments")
            raise UnknownFunction(f"unknown function: {name}")
        hits = [s for s in sigs if s.matches(arg_types)]
        if not hits:
            raise NoMatchingOverload(
                f"no overload of {name} matches ({', '.join(map(str, arg_types))})")
        if len(hits) > 1:
            raise AmbiguousOverload(f"ambiguous overloads for {name}")
        return hits[0]


# --- file format -----------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""\s*(?:(?P<comment>\#[^\n]*|//[^\n]*)
          |(?P<str>"(?:[^"\\]|\\.)*")
          |(?P<word>[A-Za-z_][A-Za-z0-9_\-]*)
          |(?P<int>-?\d+)
          |(?P<punct>[{}();:=,]))""",
    re.VERBOSE,
)


def _tokenize_catalog(text: str) -> list[str]:
    tokens, pos = [], 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            if text[pos:].strip() == "":
                break
            raise CatalogParseError(f"unexpected character {text[pos]!r} in catalog file")
        pos = m.end()
        if m.lastgroup != "comment" and m.group().strip():
            tokens.append(m.group().strip())
    return tokens


class _TokenCursor:
    def __init__(self, tokens: list[str]):
        self.tokens = tokens
        self.i = 0

    def peek(self) -> Optional[str]:
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def next(self) -> str:
        tok = self.peek()
        if tok is None:
            raise CatalogParseError("unexpected end of catalog file")
        self.i += 1
        return tok

    def expect(self, tok: str) -> str:
        got = self.next()
        if got != tok:
            raise CatalogParseError(f"expected {tok!r}, got {got!r}")
        return got


def parse_catalog_text(text: str) -> SystemCatalog:
    cat = SystemCatalog()
    cur = _TokenCursor(_tokenize_catalog(text))
    while cur.peek() is not None:
        if cur.next() != "instance":
            raise CatalogParseError("expected 'instance' block")
        cat.add_instance(_parse_instance(cur))
    register_builtin_functions(cat)
    return cat


def _parse_instance(cur: _TokenCursor) -> EngineDescriptor:
    alias = cur.next()
    cur.expect("{")
    props: dict[str, object] = {}
    entries: list[SchemaEntry] = []
    while cur.peek() != "}":
        key = cur.next()
        if key in ENTRY_KEYWORDS:
            entries.append(_parse_entry(cur, key))
        elif key in ("model", "locality", "fixed_latency_ms", "per_row_latency_us",
                     "nodes", "edges"):
            cur.expect("=")
            val = cur.next()
            cur.expect(";")
            props[key] = val
        else:
            raise CatalogParseError(f"unknown key {key!r} in instance {alias}")
    cur.expect("}")

    model = str(props.get("model", ""))
    locality = str(props.get("locality", "embedded"))
    if locality not in LOCALITIES:
        raise CatalogParseError(f"unknown locality {locality!r} in instance {alias}")
    for e in entries:
        if ENTRY_KEYWORDS[_entry_keyword(e.kind)] != model:
            raise CatalogParseError(
                f"entry {e.name} ({e.kind}) does not belong in a {model} instance")
    return EngineDescriptor(
        alias=alias,
        model=model,
        locality=locality,
        served_fixed_latency_ms=int(str(props.get("fixed_latency_ms", 0))),
        served_per_row_latency_us=int(str(props.get("per_row_latency_us", 0))),
        schema_entries=entries,
        nodes_path=_unquote(props.get("nodes")),
        edges_path=_unquote(props.get("edges")),
    )


def _entry_keyword(kind: str) -> str:
    return kind if kind in ENTRY_KEYWORDS else "table"


def _unquote(tok) -> Optional[str]:
    if tok is None:
        return None
    tok = str(tok)
    if tok.startswith('"') and tok.endswith('"'):
        return tok[1:-1].replace('\\"', '"')
    return tok


def _parse_entry(cur: _TokenCursor, kind: str) -> SchemaEntry:
    name = cur.next()
    cur.expect("(")
    cols: dict[str, str] = {}
    while cur.peek() != ")":
        col = cur.next()
        cur.expect(":")
        ctype = cur.next()
        if ctype not in ("Integer", "Double", "String", "Boolean"):
            raise CatalogParseError(f"unknown column type {ctype!r} in entry {name}")
        if col in cols:
            raise CatalogParseError(f"duplicate column {col!r} in entry {name}")
        cols[col] = ctype
        if cur.peek() == ",":
            cur.next()
    cur.expect(")")
    load_path = None
    if cur.peek() == "from":
        cur.next()
        load_path = _unquote(cur.next())
    cur.expect(";")
    return SchemaEntry(name=name, columns=cols, kind=kind, load_path=load_path)


def serialize_catalog(cat: SystemCatalog) -> str:
    """Render the instances back to the file format (functions are built-in)."""
    out = []
    for desc in cat.instances.values():
        out.append(f"instance {desc.alias} {{")
        out.append(f"  model = {desc.model};")
        out.append(f"  locality = {desc.locality};")
        if desc.served_fixed_latency_ms:
            out.append(f"  fixed_latency_ms = {desc.served_fixed_latency_ms};")
        if desc.served_per_row_latency_us:
            out.append(f"  per_row_latency_us = {desc.served_per_row_latency_us};")
        if desc.nodes_path:
            out.append(f'  nodes = "{desc.nodes_path}";')
        if desc.edges_path:
            out.append(f'  edges = "{desc.edges_path}";')
        for e in desc.schema_entries:
            cols = ", ".join(f"{c}:{t}" for c, t in e.columns.items())
            suffix = f' from "{e.load_path}"' if e.load_path else ""
            out.append(f"  {e.kind} {e.name} ({cols}){suffix};")
        out.append("}")
    return "\n".join(out) + "\n"


def load_catalog(path) -> SystemCatalog:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_catalog_text(fh.read())


# --- built-in function registry ---------------------------------------------

def register_builtin_functions(cat: SystemCatalog):
    L, T = st.list_of, st.SemanticType
    strings = L(st.STRING)
    ints = L(st.INTEGER)
    sigs = [
        FunctionSignature("lda", [st.CORPUS],
                          {"docid": (st.BOOLEAN, False), "topic": (st.INTEGER, REQUIRED),
                           "numKeywords": (st.INTEGER, 1000), "seed": (st.INTEGER, 7)},
                          [st.MATRIX, st.MATRIX], "LDAOnCorpus"),
        FunctionSignature("lda", [st.MATRIX],
                          {"topic": (st.INTEGER, REQUIRED),
                           "numKeywords": (st.INTEGER, 1000), "seed": (st.INTEGER, 7)},
                          [st.MATRIX, st.MATRIX], "LDAOnTextMatrix"),
        FunctionSignature("pageRank", [st.GRAPH],
                          {"damping": (st.DOUBLE, 0.85), "epsilon": (st.DOUBLE, 1e-8),
                           "topk": (st.BOOLEAN, False), "num": (st.INTEGER, 20)},
                          [st.RELATION], "PageRank"),
        FunctionSignature("betweenness", [st.GRAPH], {}, [st.RELATION], "Betweenness"),
        FunctionSignature("NER", [st.CORPUS],
                          {"gazetteer": (st.STRING, "gazetteer.tsv")},
                          [st.RELATION], "NER",
                          decomposition=["NLPAnnotator(tokenize)", "NLPAnnotator(ssplit)",
                                         "NLPAnnotator(pos)", "NLPAnnotator(lemma)",
                                         "NLPAnnotator(ner)"]),
        FunctionSignature("NER", [strings],
                          {"gazetteer": (st.STRING, "gazetteer.tsv")},
                          [st.RELATION], "NER",
                          decomposition=["NLPAnnotator(tokenize)", "NLPAnnotator(ssplit)",
                                         "NLPAnnotator(pos)", "NLPAnnotator(lemma)",
                                         "NLPAnnotator(ner)"]),
        FunctionSignature("tokenize", [st.CORPUS], {}, [st.CORPUS], "Tokenize",
                          decomposition=["NLPAnnotator(tokenize)"]),
        FunctionSignature("tokenize", [strings], {}, [st.CORPUS], "Tokenize",
                          decomposition=["NLPAnnotator(tokenize)"]),
        FunctionSignature("preprocess", [strings],
                          {"docid": (ints, None), "stopwords": (st.STRING, REQUIRED)},
                          [st.CORPUS], "Preprocess",
                          decomposition=["NLPAnnotator(tokenize)", "FilterStopWords"]),
        FunctionSignature("preprocess", [st.CORPUS],
                          {"stopwords": (st.STRING, REQUIRED)},
                          [st.CORPUS], "Preprocess",
                          decomposition=["NLPAnnotator(tokenize)", "FilterStopWords"]),
        FunctionSignature("keyphraseMining", [st.CORPUS, st.INTEGER], {},
                          [strings], "KeyphraseMining"),
        FunctionSignature("buildWordNeighborGraph", [st.CORPUS],
                          {"maxDistance": (st.INTEGER, 5), "words": (strings, REQUIRED),
                           "splitter": (st.STRING, " ")},
                          [st.GRAPH], "BuildWordNeighborGraph",
                          decomposition=["CollectWNFromDocs", "CreateGraph"]),
        FunctionSignature("collectWordNeighbors", [st.CORPUS],
                          {"maxDistance": (st.INTEGER, 5), "words": (strings, REQUIRED)},
                          [st.RELATION], "CollectWNFromDocs"),
        FunctionSignature("ConstructGraphFromRelation",
                          [st.RELATION, T("GraphTemplate")], {},
                          [st.GRAPH], "ConstructGraphFromRelation",
                          decomposition=["CollectGraphElementsFromRelation", "CreateGraph"]),
        FunctionSignature("range", [st.INTEGER, st.INTEGER, st.INTEGER], {},
                          [ints], "Range"),
        FunctionSignature("union", [L(L(ANY))], {}, [L(ANY)], "Union"),
        FunctionSignature("sum", [L(ANY)], {}, [st.DOUBLE], "SumList"),
        FunctionSignature("sum", [st.MATRIX], {}, [st.DOUBLE], "SumMatrix"),
        FunctionSignature("stringReplace", [st.STRING, st.STRING], {},
                          [st.STRING], "StringReplace"),
        FunctionSignature("stringJoin", [st.STRING, strings], {},
                          [st.STRING], "StringJoin"),
        FunctionSignature("toList", [L(ANY)], {}, [L(ANY)], "ToList"),
        FunctionSignature("getValue", [L(st.DOUBLE), st.INTEGER], {},
                          [st.DOUBLE], "GetValueByIndices"),
        FunctionSignature("rowNames", [st.MATRIX], {}, [L(ANY)], "RowKeys"),
        FunctionSignature("colNames", [st.MATRIX], {}, [L(ANY)], "ColumnKeys"),
        FunctionSignature("getRows", [st.MATRIX, L(ANY)], {}, [st.MATRIX], "GetRowsByKeys"),
        FunctionSignature("getCols", [st.MATRIX, L(ANY)], {}, [st.MATRIX], "GetColsByKeys"),
        FunctionSignature("svd", [st.MATRIX], {"k": (st.INTEGER, REQUIRED)},
                          [st.MATRIX, st.MATRIX, st.MATRIX], "SVD"),
    ]
    # query and store keywords: reserved at parse level, present for arity checks
    for kw, arity in (("executeSQL", 2), ("executeCypher", 2), ("executeSOLR", 2),
                      ("store", 1)):
        sigs.append(FunctionSignature(kw, [ANY] * arity, {}, [ANY],
                                      reserved=True))
    for sig in sigs:
        cat.add_function(sig)
    _check_decompositions(cat)


def _check_decompositions(cat: SystemCatalog):
    from .logical import LOGICAL_KINDS  # deferred: logical imports semtypes only
    for sigs in cat.functions.values():
        for sig in sigs:
            kinds = list(sig.decomposition or [])
            if sig.logical_kind:
                kinds.append(sig.logical_kind)
            for kind in kinds:
                base = kind.split("(")[0]
                if base not in LOGICAL_KINDS:
                    raise CatalogParseError(
                        f"function {sig.name} references unregistered operator {kind}")


def builtin_catalog() -> SystemCatalog:
    """A catalog with zero engines and the built-in function registry."""
    cat = SystemCatalog()
    register_builtin_functions(cat)
    return cat
