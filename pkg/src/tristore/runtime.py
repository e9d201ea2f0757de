"""Execution primitives for physical operators.

`OpRuntime.run_op` executes one first-order operator given its input values;
higher-order coordination (Map/Reduce/Filter bodies), partitioned execution,
and buffered chains live in the executor.  The reference interpreter reuses
these primitives through the default logical-to-physical translation.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field

from .analytics import collections_ops as cops
from .analytics import graphalgs, nlp, topics
from .ast_nodes import Param, parse_template
from .engines.polystore import GRAPH_DB, Polystore
from .errors import (ExecutionError, SchemaMismatch, TypeMismatch,
                     Unimplemented)
from .querylang import parse_cypher, parse_solr, parse_sql
from .values import (Corpus, Document, Matrix, PropertyGraph, Relation)


@dataclass
class EngineRef:
    """A value registered inside an engine (temp relation or loaded graph)."""
    engine: str
    name: str = ""
    model: str = "relational"


@dataclass
class OpRuntime:
    polystore: Polystore
    resource_dir: str = "."
    out_dir: str = "."
    seed: int = 7
    _resources: dict[str, object] = field(default_factory=dict)

    # --- resources ---

    def stopwords(self, path: str) -> list[str]:
        key = "stop:" + path
        if key not in self._resources:
            self._resources[key] = nlp.load_stopwords(self._resolve(path))
        return self._resources[key]

    def gazetteer(self, path: str) -> dict:
        key = "gaz:" + path
        if key not in self._resources:
            self._resources[key] = nlp.load_gazetteer(self._resolve(path))
        return self._resources[key]

    def _resolve(self, path: str) -> str:
        return path if os.path.isabs(path) else os.path.join(self.resource_dir, path)

    def nlp_resources(self, args: dict) -> dict:
        res = {}
        if args.get("gazetteer"):
            res["gazetteer"] = self.gazetteer(args["gazetteer"])
        return res

    # --- operator dispatch ---

    def run_op(self, kind: str, args: dict, inputs: list, extra: dict | None = None):
        handler = _HANDLERS.get(kind)
        if handler is None:
            raise ExecutionError(f"no runtime for operator {kind!r}", node=kind)
        return handler(self, args, inputs)


def _as_relation(value) -> Relation:
    if isinstance(value, Relation):
        return value
    raise TypeMismatch("Relation", type(value).__name__)


def _as_corpus(value) -> Corpus:
    if isinstance(value, Corpus):
        return value
    raise TypeMismatch("Corpus", type(value).__name__)


# --- query execution -----------------------------------------------------------

def _param_resolver(rt: OpRuntime, args: dict, inputs: list):
    """Map template Params to their bound input values."""
    offset = 1 if args.get("target_var") else 0
    slots = {tuple(p): offset + i for i, p in enumerate(args.get("params", ()))}

    def resolve(param: Param):
        key = (param.var, param.member)
        if key not in slots:
            raise ExecutionError(f"unbound query parameter ${param.var}")
        value = inputs[slots[key]]
        if isinstance(value, EngineRef):
            value = rt.polystore.sql(value.engine).table(value.name)
        return value
    return resolve


def _shipped_units(args: dict, inputs: list) -> int:
    """List parameters travel with the query text to a served engine."""
    units = 0
    offset = 1 if args.get("target_var") else 0
    for i, _p in enumerate(args.get("params", ())):
        value = inputs[offset + i]
        if isinstance(value, list):
            units += len(value)
    return units


def _run_sql(rt: OpRuntime, args: dict, inputs: list):
    engine_alias = args.get("exec_engine") or args.get("engine")
    engine = rt.polystore.sql(engine_alias)
    sel = parse_sql(parse_template(args["template"]))
    result = engine.execute(sel, _param_resolver(rt, args, inputs))
    rt.polystore.charge_query(engine_alias, _shipped_units(args, inputs),
                              len(result.rows))
    schema = dict(args.get("schema", ()))
    if schema:
        result = Relation({c: schema[c] for c in result.schema}, result.rows)
    return result


def _run_cypher(rt: OpRuntime, args: dict, inputs: list):
    cq = parse_cypher(parse_template(args["template"]))
    schema = dict(args.get("schema", ()))
    if args.get("target_var"):
        target = inputs[0]
        if isinstance(target, EngineRef):
            engine = rt.polystore.graph(target.engine)
            result = engine.execute(cq, _param_resolver(rt, args, inputs), schema)
            rt.polystore.charge_query(target.engine,
                                      _shipped_units(args, inputs), len(result.rows))
            return result
        if not isinstance(target, PropertyGraph):
            raise TypeMismatch("PropertyGraph", type(target).__name__)
        from .engines.graph import execute_cypher
        return execute_cypher(cq, target, _param_resolver(rt, args, inputs), schema)
    alias = args["engine"]
    engine = rt.polystore.graph(alias)
    result = engine.execute(cq, _param_resolver(rt, args, inputs), schema)
    rt.polystore.charge_query(alias, _shipped_units(args, inputs), len(result.rows))
    return result


def _run_solr(rt: OpRuntime, args: dict, inputs: list):
    alias = args["engine"]
    engine = rt.polystore.text(alias)
    sq = parse_solr(parse_template(args["template"]))
    corpus = engine.execute(sq, _param_resolver(rt, args, inputs))
    rt.polystore.charge_query(alias, _shipped_units(args, inputs), len(corpus.docs))
    fields = [c for c, _t in args.get("schema", ())]
    if fields:
        docs = [Document(d.doc_id, (d.fields or {}).get(fields[0], d.content),
                         fields=d.fields) for d in corpus.docs]
        corpus = Corpus(docs)
    return corpus


# --- movement --------------------------------------------------------------------

def _run_relation2engine(rt: OpRuntime, args: dict, inputs: list):
    rel = inputs[0]
    if isinstance(rel, EngineRef):
        rel = rt.polystore.sql(rel.engine).table(rel.name)
    name = rt.polystore.move_relation(_as_relation(rel), args["dst"])
    return EngineRef(args["dst"], name)


def _run_enginetable2local(rt: OpRuntime, args: dict, inputs: list):
    columns = list(args["columns"]) if args.get("columns") else None
    rel = rt.polystore.pull_table(args["src"], args["table"], columns)
    dst = args.get("dst", "__local__")
    rt.polystore.sql(dst).register(args["table"], rel, temp=True)
    return EngineRef(dst, args["table"])


def _run_graph2engine(rt: OpRuntime, args: dict, inputs: list):
    graph = inputs[0]
    if not isinstance(graph, PropertyGraph):
        raise TypeMismatch("PropertyGraph", type(graph).__name__)
    dst = args.get("dst", GRAPH_DB)
    rt.polystore.move_graph(graph, dst)
    return EngineRef(dst, model="graph")


# --- graph construction and analytics ----------------------------------------------

def _template_labels(tmpl) -> dict:
    (_tag, src_label, src_props, edge_label, edge_props, dst_label,
     dst_props, directed) = tmpl
    return {"src_label": src_label, "src_props": src_props,
            "edge_label": edge_label, "edge_props": edge_props,
            "dst_label": dst_label, "dst_props": dst_props, "directed": directed}


def build_graph_from_relation(rel: Relation, tmpl) -> PropertyGraph:
    """One node per distinct node-key value, one edge per row (no implicit
    aggregation: repeated pairs yield parallel edges)."""
    t = _template_labels(tmpl)
    cols = rel.columns

    def col_index(colref):
        _key, _var, column = colref if len(colref) == 3 else (None, None, colref)
        if column not in cols:
            raise SchemaMismatch(f"template column {column!r} not in relation")
        return cols.index(column)

    src_props = [(k, col_index((k, v, c))) for k, v, c in t["src_props"]]
    dst_props = [(k, col_index((k, v, c))) for k, v, c in t["dst_props"]]
    edge_props = [(k, col_index((k, v, c))) for k, v, c in t["edge_props"]]
    key_prop = t["src_props"][0][0] if t["src_props"] else None

    graph = PropertyGraph(key_prop=key_prop)
    node_ids: dict[tuple, int] = {}

    def node_for(label, props, row):
        values = tuple(row[i] for _k, i in props)
        key = (label, values)
        if key not in node_ids:
            node_ids[key] = graph.add_node(
                label, {k: row[i] for k, i in props})
        return node_ids[key]

    for row in rel.rows:
        a = node_for(t["src_label"], src_props, row)
        b = node_for(t["dst_label"], dst_props, row)
        graph.add_edge(a, b, t["edge_label"], {k: row[i] for k, i in edge_props})
    return graph


def _run_create_graph(rt: OpRuntime, args: dict, inputs: list):
    rel = _as_relation(inputs[0])
    return build_graph_from_relation(rel, args["template"])


def _run_create_graph_engine(rt: OpRuntime, args: dict, inputs: list):
    graph = build_graph_from_relation(_as_relation(inputs[0]), args["template"])
    dst = args.get("dst", GRAPH_DB)
    engine = rt.polystore.move_graph(graph, dst)
    engine.label_index()
    engine.csr()
    return EngineRef(dst, model="graph")


def _graph_of(rt: OpRuntime, value) -> tuple[PropertyGraph, object]:
    if isinstance(value, EngineRef):
        engine = rt.polystore.graph(value.engine)
        return engine.graph, engine
    if isinstance(value, PropertyGraph):
        return value, None
    raise TypeMismatch("PropertyGraph", type(value).__name__)


def _run_pagerank(rt: OpRuntime, args: dict, inputs: list):
    graph, engine = _graph_of(rt, inputs[0])
    topk = args.get("num") if args.get("topk") else None
    damping = args.get("damping", 0.85)
    epsilon = args.get("epsilon", 1e-8)
    if engine is not None:
        return graphalgs.pagerank(graph, damping, epsilon, topk,
                                  engine_index=engine.csr())
    return graphalgs.pagerank(graph, damping, epsilon, topk)


def _run_betweenness(rt: OpRuntime, args: dict, inputs: list):
    graph, _engine = _graph_of(rt, inputs[0])
    return graphalgs.betweenness(graph)


def _run_collect_wn(rt: OpRuntime, args: dict, inputs: list):
    corpus = _as_corpus(inputs[0])
    words = inputs[1] if len(inputs) > 1 else []
    return graphalgs.collect_word_neighbors(corpus, args.get("maxDistance", 5),
                                            list(words))


def _run_collect_ger(rt: OpRuntime, args: dict, inputs: list):
    return _as_relation(inputs[0])


# --- NLP and topics ------------------------------------------------------------------

def _apply_stage(rt: OpRuntime, corpus: Corpus, stage: str, stage_args: dict):
    if stage == "ner":
        annotated = nlp.annotate(corpus, "ner", rt.nlp_resources(stage_args))
        pairs = nlp.extract_entities(annotated)
        return Relation({"type": "String", "name": "String"}, pairs)
    return nlp.annotate(corpus, stage, {})


def _run_annotator(rt: OpRuntime, args: dict, inputs: list):
    return _apply_stage(rt, _as_corpus(inputs[0]), args["stage"], args)


def _run_pipeline(rt: OpRuntime, args: dict, inputs: list):
    value = _as_corpus(inputs[0])
    for stage, stage_args in args.get("stages", ()):
        value = _apply_stage(rt, value, stage, dict(stage_args))
    return value


def _run_filter_stopwords(rt: OpRuntime, args: dict, inputs: list):
    stopwords = rt.stopwords(args["stopwords"]) if args.get("stopwords") else []
    return nlp.filter_stopwords(_as_corpus(inputs[0]), stopwords)


def _run_create_docs_records(rt: OpRuntime, args: dict, inputs: list):
    contents, ids = inputs[0], inputs[1]
    if len(contents) != len(ids):
        raise SchemaMismatch("content and docid columns differ in length")
    return Corpus([Document(int(i), str(c)) for c, i in zip(contents, ids)])


def _run_create_docs_list(rt: OpRuntime, args: dict, inputs: list):
    return Corpus([Document(i, str(c)) for i, c in enumerate(inputs[0])])


def _run_lda_corpus(rt: OpRuntime, args: dict, inputs: list):
    corpus = _as_corpus(inputs[0])
    return topics.lda(corpus, args["topic"], args.get("numKeywords", 1000),
                      args.get("seed", rt.seed))


def _run_lda_matrix(rt: OpRuntime, args: dict, inputs: list):
    m = inputs[0]
    if not isinstance(m, Matrix):
        raise TypeMismatch("Matrix", type(m).__name__)
    # expand a doc-term count matrix back into token lists
    docs = []
    vocab = [str(k) for k in (m.col_keys or range(m.shape[1]))]
    row_ids = m.row_keys or list(range(m.shape[0]))
    for r in range(m.shape[0]):
        toks = []
        for c in range(m.shape[1]):
            toks.extend([vocab[c]] * int(m.values[r, c]))
        docs.append(Document(int(row_ids[r]), " ".join(toks), tokens=toks))
    return topics.lda(Corpus(docs), args["topic"], args.get("numKeywords", 1000),
                      args.get("seed", rt.seed))


def _run_keyphrase(rt: OpRuntime, args: dict, inputs: list):
    return topics.keyphrase_mining(_as_corpus(inputs[0]), int(inputs[1]))


# --- collection / matrix operators ----------------------------------------------------

def _run_get_columns(rt: OpRuntime, args: dict, inputs: list):
    value = inputs[0]
    col = args["column"]
    if isinstance(value, EngineRef):
        value = rt.polystore.sql(value.engine).table(value.name)
    if isinstance(value, Relation):
        return value.column(col)
    if isinstance(value, Corpus):
        return [(d.fields or {}).get(col, d.content) for d in value.docs]
    raise TypeMismatch("Relation or Corpus", type(value).__name__)


def _run_store_relational(rt: OpRuntime, args: dict, inputs: list):
    value = inputs[0]
    rel = _store_relation(value, args)
    engine = rt.polystore.sql(args["db"])
    table = args.get("table") or args.get("var", "result")
    engine.register(table, rel)
    rt.polystore.ledger.charge(rt.polystore.descriptor(args["db"]),
                               "movement", len(rel.rows))
    return rel


def _run_store_csv(rt: OpRuntime, args: dict, inputs: list):
    rel = _store_relation(inputs[0], args)
    table = args.get("table") or args.get("var", "result")
    path = os.path.join(rt.out_dir, table if table.endswith(".csv")
                        else table + ".csv")
    os.makedirs(rt.out_dir, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(rel.columns)
        writer.writerows(rel.rows)
    return rel


def _store_relation(value, args: dict) -> Relation:
    columns = args.get("columns") or ()
    if isinstance(value, Relation):
        if not columns:
            return value
        names = [t for t, _m in columns]
        idxs = [value.columns.index(m) for _t, m in columns]
        return Relation({n: value.schema[value.columns[i]]
                         for n, i in zip(names, idxs)},
                        [tuple(row[i] for i in idxs) for row in value.rows])
    if isinstance(value, list):
        mapping = columns or (("index", "index"), ("value", "value"))
        rows = []
        for i, v in enumerate(value):
            row = tuple(i if m == "index" else v for _t, m in mapping)
            rows.append(row)
        elem_type = "Double" if any(isinstance(v, float) for v in value) else (
            "Integer" if all(isinstance(v, int) for v in value) else "String")
        schema = {t: ("Integer" if m == "index" else elem_type)
                  for t, m in mapping}
        return Relation(schema, rows)
    raise TypeMismatch("Relation or List", type(value).__name__)


def _cmp(op: str, left, right) -> bool:
    if op == "<":
        return left < right
    if op == ">":
        return left > right
    return left == right


_HANDLERS = {
    "ExecuteSQL@Engine": _run_sql,
    "ExecuteSQL@Served": _run_sql,
    "ExecuteSQL@Local": _run_sql,
    "ExecuteSQL@InMemory": _run_sql,
    "ExecuteCypher@Engine": _run_cypher,
    "ExecuteCypher@Value": _run_cypher,
    "ExecuteSolr@Engine": _run_solr,
    "Relation2Engine": _run_relation2engine,
    "EngineTable2Local": _run_enginetable2local,
    "Graph2Engine": _run_graph2engine,
    "CreateGraph@InMemoryLib": _run_create_graph,
    "CreateGraph@GraphEngine": _run_create_graph_engine,
    "PageRank@InMemoryLib": _run_pagerank,
    "PageRank@GraphEngine": _run_pagerank,
    "Betweenness@InMemoryLib": _run_betweenness,
    "Betweenness@GraphEngine": _run_betweenness,
    "CollectWNFromDocs@Native": _run_collect_wn,
    "CollectGraphElementsFromRelation@Native": _run_collect_ger,
    "NLPAnnotator@Native": _run_annotator,
    "NLPPipeline@Native": _run_pipeline,
    "FilterStopWords@Native": _run_filter_stopwords,
    "CreateDocumentsFromRecords@Native": _run_create_docs_records,
    "CreateDocumentsFromList@Native": _run_create_docs_list,
    "LDAOnCorpus@Native": _run_lda_corpus,
    "LDAOnTextMatrix@Native": _run_lda_matrix,
    "KeyphraseMining@Native": _run_keyphrase,
    "SVD@Native": lambda rt, a, i: (_ for _ in ()).throw(
        Unimplemented("SVD is registered but not implemented")),
    "GetColumns@Local": _run_get_columns,
    "GetElement@Local": lambda rt, a, i: (
        i[0][a["index"]] if "index" in a else i[0][int(i[1])]),
    "GetValueByIndices@Local": lambda rt, a, i: cops.get_value(i[0], int(i[1])),
    "GetValueByKeys@Local": lambda rt, a, i: cops.get_value(i[0], int(i[1])),
    "GetRowsByIndices@Local": lambda rt, a, i: cops.get_rows_by_indices(
        i[0], list(i[1])),
    "GetRowsByKeys@Local": lambda rt, a, i: cops.get_rows_by_keys(i[0], list(i[1])),
    "GetColsByIndices@Local": lambda rt, a, i: cops.get_cols_by_indices(
        i[0], list(i[1])),
    "GetColsByKeys@Local": lambda rt, a, i: cops.get_cols_by_keys(i[0], list(i[1])),
    "RowKeys@Local": lambda rt, a, i: cops.row_keys(i[0]),
    "ColumnKeys@Local": lambda rt, a, i: cops.col_keys(i[0]),
    "SumList@Native": lambda rt, a, i: cops.sum_list(i[0]),
    "SumColumn@Native": lambda rt, a, i: cops.sum_list(i[0]),
    "SumVector@Native": lambda rt, a, i: cops.sum_list(i[0]),
    "SumMatrix@Native": lambda rt, a, i: cops.sum_matrix(i[0]),
    "Range@Local": lambda rt, a, i: cops.make_range(int(i[0]), int(i[1]),
                                                    int(i[2])),
    "Union@Local": lambda rt, a, i: cops.union_lists(i[0]),
    "StringReplace@Local": lambda rt, a, i: cops.string_replace(str(i[0]),
                                                                str(i[1])),
    "StringJoin@Local": lambda rt, a, i: cops.string_join(str(i[0]), i[1]),
    "ToList@Local": lambda rt, a, i: list(i[0]),
    "MakeList@Local": lambda rt, a, i: list(i),
    "MakeTuple@Local": lambda rt, a, i: tuple(i),
    "Const@Local": lambda rt, a, i: (list(a["value"])
                                     if a.get("prim") == "List" else a["value"]),
    "Compare@Local": lambda rt, a, i: _cmp(a["op"], i[0], i[1]),
    "Logic@Local": lambda rt, a, i: (not i[0] if a["op"] == "NOT"
                                     else (all(i) if a["op"] == "AND" else any(i))),
    "Store2Relational@Engine": _run_store_relational,
    "Store2CSV@Local": _run_store_csv,
}
