"""Embedded property-graph engine and the Cypher-subset evaluator.

The evaluator works directly on a PropertyGraph value, so the in-memory
variant and the engine-resident variant share one implementation; the engine
adds label indexes and a cached CSR adjacency for vectorized PageRank.
"""

from __future__ import annotations

from typing import Callable, Optional

from ..ast_nodes import Param
from ..errors import UnknownLabelOrProperty, UnsupportedSyntax
from ..querylang import (CyBool, CyContains, CyDynamic, CyEq, CyIn, CyProp,
                         CypherQuery, parse_dynamic_cypher_predicate)
from ..values import PropertyGraph, Relation
from ..analytics import graphalgs


class GraphEngine:
    def __init__(self, alias: str, graph: PropertyGraph | None = None):
        self.alias = alias
        self.graph = graph or PropertyGraph()
        self._label_index: dict[str, list[int]] | None = None
        self._csr = None

    def set_graph(self, graph: PropertyGraph):
        self.graph = graph
        self._label_index = None
        self._csr = None

    def label_index(self) -> dict[str, list[int]]:
        if self._label_index is None:
            idx: dict[str, list[int]] = {}
            for nid, node in self.graph.nodes.items():
                idx.setdefault(node.label, []).append(nid)
            self._label_index = idx
        return self._label_index

    def csr(self):
        if self._csr is None:
            self._csr = graphalgs.build_csr(self.graph)
        return self._csr

    def execute(self, q: CypherQuery, param_value,
                result_schema: dict[str, str]) -> Relation:
        return execute_cypher(q, self.graph, param_value, result_schema)

    def pagerank(self, damping=0.85, epsilon=1e-8, topk=None) -> Relation:
        return graphalgs.pagerank(self.graph, damping, epsilon, topk,
                                  engine_index=self.csr())

    def betweenness(self) -> Relation:
        return graphalgs.betweenness(self.graph)


def execute_cypher(q: CypherQuery, graph: PropertyGraph,
                   param_value: Callable[[Param], object],
                   result_schema: dict[str, str]) -> Relation:
    bindings = _enumerate_bindings(q, graph)
    where = q.where
    rows = []
    for env in bindings:
        if where is None or _eval_pred(where, env, graph, param_value):
            row = []
            for prop, _alias in q.returns:
                row.append(_prop_value(prop, env, graph, required=True))
            rows.append(tuple(row))
    schema = dict(result_schema)
    if len(schema) != len(q.returns):
        raise UnsupportedSyntax(
            "result schema arity does not match RETURN list")
    return Relation(schema, rows)


def _enumerate_bindings(q: CypherQuery, graph: PropertyGraph):
    envs = []
    if q.is_edge_pattern:
        for eid, edge in graph.edges.items():
            orientations = [(edge.src, edge.dst)]
            if not q.directed:
                orientations.append((edge.dst, edge.src))
            for a, b in orientations:
                if q.node.label and graph.nodes[a].label != q.node.label:
                    continue
                if q.other and q.other.label and graph.nodes[b].label != q.other.label:
                    continue
                env = {}
                if q.node.var:
                    env[q.node.var] = ("node", a)
                if q.other and q.other.var:
                    env[q.other.var] = ("node", b)
                env["__edge__"] = ("edge", eid)
                if q.edge_label and edge.label != q.edge_label:
                    continue
                envs.append(env)
        return envs
    for nid, node in graph.nodes.items():
        if q.node.label and node.label != q.node.label:
            continue
        env = {}
        if q.node.var:
            env[q.node.var] = ("node", nid)
        envs.append(env)
    return envs


def _prop_value(prop: CyProp, env, graph: PropertyGraph, required: bool = False):
    binding = env.get(prop.var)
    if binding is None:
        # property of the (anonymous or named) relationship variable
        binding = env.get("__edge__")
        if binding is None:
            raise UnknownLabelOrProperty(f"unbound variable {prop.var!r}")
    kind, ident = binding
    props = (graph.nodes[ident].props if kind == "node"
             else graph.edges[ident].props)
    if prop.prop not in props:
        if required:
            raise UnknownLabelOrProperty(
                f"property {prop.prop!r} absent on matched {kind}")
        return None
    return props[prop.prop]


def _eval_pred(pred, env, graph, param_value) -> bool:
    if isinstance(pred, CyBool):
        if pred.op == "AND":
            return all(_eval_pred(p, env, graph, param_value) for p in pred.operands)
        return any(_eval_pred(p, env, graph, param_value) for p in pred.operands)
    if isinstance(pred, CyDynamic):
        text = param_value(pred.param)
        parsed = parse_dynamic_cypher_predicate(str(text))
        return _eval_pred(parsed, env, graph, param_value)
    if isinstance(pred, CyIn):
        value = _prop_value(pred.left, env, graph)
        if isinstance(pred.right, Param):
            values = param_value(pred.right)
        else:
            values = pred.right
        return value is not None and value in set(values)
    if isinstance(pred, CyContains):
        value = _prop_value(pred.left, env, graph)
        needle = (param_value(pred.needle) if isinstance(pred.needle, Param)
                  else pred.needle)
        return value is not None and str(needle).lower() in str(value).lower()
    if isinstance(pred, CyEq):
        left = _prop_value(pred.left, env, graph)
        if isinstance(pred.right, CyProp):
            return left == _prop_value(pred.right, env, graph)
        right = param_value(pred.right) if isinstance(pred.right, Param) else pred.right
        return left == right
    raise UnsupportedSyntax(f"cannot evaluate predicate {pred!r}")
