"""Reference interpreter: direct single-threaded evaluation of a logical DAG.

No pattern matching, no partitioning, no buffering, no cost decisions; this
is the oracle the physical executor is checked against.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .errors import ExecutionError, TriStoreError
from .logical import LogicalDAG, REGISTRY, args_dict
from .physical import DEFAULT_TRANSLATION, compute_regions
from .runtime import OpRuntime
from .values import Corpus, Matrix, Relation
from .analytics import collections_ops as cops

_INTERP_KIND = dict(DEFAULT_TRANSLATION)
_INTERP_KIND.update({
    "ExecuteSQL": "ExecuteSQL@Engine",
    "ExecuteCypher": "ExecuteCypher@Engine",
    "ExecuteSolr": "ExecuteSolr@Engine",
})


@dataclass
class InterpResult:
    bindings: dict[str, object]
    stored: dict[str, Relation] = field(default_factory=dict)


def interpret(dag: LogicalDAG, rt: OpRuntime) -> InterpResult:
    return _Interp(dag, rt).run()


class _Interp:
    def __init__(self, dag: LogicalDAG, rt: OpRuntime):
        self.dag = dag
        self.rt = rt
        self.regions = compute_regions(dag)
        self.memo: dict = {}
        self._gen = itertools.count()
        self.lambda_nodes: dict[int, list[int]] = {}
        for nid, node in dag.nodes.items():
            if node.kind in ("LambdaVar", "ElementRef"):
                binder = args_dict(node).get("binder")
                self.lambda_nodes.setdefault(binder, []).append(nid)

    def run(self) -> InterpResult:
        bindings = {}
        for var, (nid, slot) in self.dag.outputs.items():
            bindings[var] = self.eval(nid, {})[slot]
        stored = {}
        for sid in self.dag.stores:
            rel = self.eval(sid, {})[0]
            stored[args_dict(self.dag.nodes[sid]).get("table") or str(sid)] = rel
        return InterpResult(bindings, stored)

    def eval(self, nid: int, scope: dict) -> list:
        node = self.dag.nodes[nid]
        if node.kind in ("LambdaVar", "ElementRef"):
            binder = args_dict(node).get("binder")
            _token, value = scope[binder]
            if isinstance(value, tuple) and args_dict(node).get("slot") is not None:
                return [value[args_dict(node)["slot"]]]
            return [value]

        deps = self.regions.get(nid, frozenset())
        key = (nid, tuple(sorted((b, scope[b][0]) for b in deps if b in scope)))
        if key in self.memo:
            return self.memo[key]

        args = args_dict(node)
        try:
            if node.kind == "Map":
                result = [self._eval_map(nid, scope)]
            elif node.kind == "Reduce":
                result = [self._eval_reduce(nid, scope)]
            elif node.kind == "Filter":
                result = [self._eval_filter(nid, scope)]
            elif node.kind == "CreateRelation":
                result = self._inputs(nid, scope)
            elif node.kind in _KEYWORD_OPS:
                result = [_KEYWORD_OPS[node.kind](self.rt, args,
                                                  self._inputs(nid, scope))]
            else:
                inputs = self._inputs(nid, scope)
                kind = _INTERP_KIND.get(node.kind)
                if kind is None:
                    raise ExecutionError(f"no interpretation for {node.kind!r}")
                value = self.rt.run_op(kind, args, inputs)
                spec = REGISTRY.get(node.kind)
                result = list(value) if (spec and spec.outputs > 1) else [value]
        except TriStoreError:
            raise
        except Exception as err:  # annotate with node provenance
            raise ExecutionError(f"{type(err).__name__}: {err}",
                                 node=f"{node.kind}#{nid}") from err
        self.memo[key] = result
        return result

    def _inputs(self, nid: int, scope: dict) -> list:
        return [self.eval(e.src, scope)[e.src_slot] for e in self.dag.inputs(nid)]

    def _eval_map(self, nid: int, scope: dict):
        source = self._inputs(nid, scope)[0]
        root = self.dag.body_root(nid)
        out = []
        for elem in _elements(source):
            inner = dict(scope)
            inner[nid] = (next(self._gen), elem)
            out.append(self.eval(root, inner)[0])
        return out

    def _eval_reduce(self, nid: int, scope: dict):
        source = self._inputs(nid, scope)[0]
        items = _elements(source)
        if not items:
            raise ExecutionError("reduce over an empty collection",
                                 node=f"Reduce#{nid}")
        root = self.dag.body_root(nid)
        acc = items[0]
        for item in items[1:]:
            inner = dict(scope)
            inner[nid] = (next(self._gen), (acc, item))
            acc = self.eval(root, inner)[0]
        return acc

    def _eval_filter(self, nid: int, scope: dict):
        node = self.dag.nodes[nid]
        mode = args_dict(node).get("mode")
        source = self._inputs(nid, scope)[0]
        root = self.dag.body_root(nid)

        def keep(element) -> bool:
            inner = dict(scope)
            inner[nid] = (next(self._gen), element)
            return bool(self.eval(root, inner)[0])

        if isinstance(source, Matrix):
            if mode == "Col":
                return cops.filter_matrix_cols(source, keep)
            return cops.filter_matrix_rows(source, keep)
        if isinstance(source, list):
            return [x for x in source if keep(x)]
        raise ExecutionError(f"cannot filter {type(source).__name__}",
                             node=f"Filter#{nid}")


def _elements(source) -> list:
    if isinstance(source, list):
        return source
    if isinstance(source, Corpus):
        return list(source.docs)
    if isinstance(source, Relation):
        return list(source.rows)
    raise ExecutionError(f"cannot iterate over {type(source).__name__}")


# direct evaluation of keyword-level operators, so the oracle does not depend
# on the Rule-1 decomposition it is used to check

def _kw_corpus(inputs):
    value = inputs[0]
    if isinstance(value, list):
        from .values import Document
        return Corpus([Document(i, str(c)) for i, c in enumerate(value)])
    return value


def _kw_ner(rt, args, inputs):
    from .analytics import nlp
    corpus = nlp.annotate(_kw_corpus(inputs), "tokenize")
    for stage in ("ssplit", "pos", "lemma"):
        corpus = nlp.annotate(corpus, stage)
    annotated = nlp.annotate(corpus, "ner", rt.nlp_resources(args))
    return Relation({"type": "String", "name": "String"},
                    nlp.extract_entities(annotated))


def _kw_tokenize(rt, args, inputs):
    from .analytics import nlp
    return nlp.annotate(_kw_corpus(inputs), "tokenize")


def _kw_preprocess(rt, args, inputs):
    from .analytics import nlp
    from .values import Document
    value = inputs[0]
    if isinstance(value, list):
        ids = inputs[1] if len(inputs) > 1 else range(len(value))
        value = Corpus([Document(int(i), str(c)) for c, i in zip(value, ids)])
    corpus = nlp.annotate(value, "tokenize")
    stop = rt.stopwords(args["stopwords"]) if args.get("stopwords") else []
    return nlp.filter_stopwords(corpus, stop)


def _kw_build_wn_graph(rt, args, inputs):
    from .analytics import graphalgs
    from .logical import WORD_GRAPH_TEMPLATE
    from .runtime import build_graph_from_relation
    pairs = graphalgs.collect_word_neighbors(inputs[0],
                                             args.get("maxDistance", 5),
                                             list(inputs[1]))
    return build_graph_from_relation(pairs, WORD_GRAPH_TEMPLATE)


def _kw_construct_graph(rt, args, inputs):
    from .runtime import build_graph_from_relation
    return build_graph_from_relation(inputs[0], args["template"])


_KEYWORD_OPS = {
    "NER": _kw_ner,
    "Tokenize": _kw_tokenize,
    "Preprocess": _kw_preprocess,
    "BuildWordNeighborGraph": _kw_build_wn_graph,
    "ConstructGraphFromRelation": _kw_construct_graph,
}
