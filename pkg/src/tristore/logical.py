"""Logical plan DAG: construction from a typed script and the rewrite rules.

Nodes are platform-agnostic operators; edges carry a kind (``dataflow`` or
``sub`` for sub-operator consumption) plus source/destination slots.
Higher-order operators (Map, Reduce, Filter) own a body sub-plan whose root
connects to them through a single ``sub`` edge; body nodes that depend on the
binder reference it through LambdaVar / ElementRef nodes.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace

from .ast_nodes import (Assignment, BinCmp, FuncCall, GraphTemplate, Index,
                        ListLit, Literal, Logic, MapExpr, Member, Param,
                        Query, ReduceExpr, Store, TupleLit, UnderscoreRef,
                        VarRef, WhereExpr)
from .errors import PlanError, SemanticError
from .semantics import TypedScript

# --- operator registry -------------------------------------------------------

@dataclass(frozen=True)
class OpSpec:
    name: str
    pure: bool = True        # may Rule 2 treat equal applications as one
    mergeable: bool = True   # eligible for hash-consing at all
    higher_order: bool = False
    outputs: int = 1


_SPECS = [
    OpSpec("ExecuteSQL"), OpSpec("ExecuteCypher"), OpSpec("ExecuteSolr"),
    OpSpec("CreateRelation"),
    OpSpec("CollectWNFromDocs"), OpSpec("CollectGraphElementsFromRelation"),
    OpSpec("CreateGraph"),
    OpSpec("PageRank"), OpSpec("Betweenness"), OpSpec("GetColumns"),
    OpSpec("LDAOnCorpus", outputs=2), OpSpec("LDAOnTextMatrix", outputs=2),
    OpSpec("SVD", outputs=3), OpSpec("KeyphraseMining"),
    OpSpec("NLPAnnotator"), OpSpec("NLPPipeline"), OpSpec("FilterStopWords"),
    OpSpec("GetValueByIndices"), OpSpec("GetValueByKeys"),
    OpSpec("GetRowsByIndices"), OpSpec("GetRowsByKeys"),
    OpSpec("GetColsByIndices"), OpSpec("GetColsByKeys"),
    OpSpec("RowKeys"), OpSpec("ColumnKeys"),
    OpSpec("SumList"), OpSpec("SumColumn"), OpSpec("SumMatrix"), OpSpec("SumVector"),
    OpSpec("Range"),
    OpSpec("Map", higher_order=True, mergeable=False),
    OpSpec("Reduce", higher_order=True, mergeable=False),
    OpSpec("Filter", higher_order=True, mergeable=False),
    OpSpec("Compare"), OpSpec("Logic"),
    OpSpec("Store2Relational", pure=False, mergeable=False),
    OpSpec("Store2Graph", pure=False, mergeable=False),
    OpSpec("Store2CSV", pure=False, mergeable=False),
    OpSpec("Const"), OpSpec("Union"),
    OpSpec("StringReplace"), OpSpec("StringJoin"), OpSpec("ToList"),
    OpSpec("CreateDocumentsFromRecords"), OpSpec("CreateDocumentsFromList"),
    OpSpec("MakeList"), OpSpec("MakeTuple"), OpSpec("GetElement"),
    OpSpec("LambdaVar", mergeable=False), OpSpec("ElementRef", mergeable=False),
    # keyword-level operators expanded by Rule 1
    OpSpec("NER"), OpSpec("Tokenize"), OpSpec("Preprocess"),
    OpSpec("BuildWordNeighborGraph"), OpSpec("ConstructGraphFromRelation"),
]

REGISTRY: dict[str, OpSpec] = {s.name: s for s in _SPECS}
LOGICAL_KINDS = set(REGISTRY)


# --- DAG ----------------------------------------------------------------------

@dataclass
class LNode:
    id: int
    kind: str
    args: tuple = ()  # sorted (key, value) pairs; values hashable


@dataclass(frozen=True)
class LEdge:
    src: int
    dst: int
    kind: str = "dataflow"  # dataflow | sub
    dst_slot: int = 0
    src_slot: int = 0


def make_args(**kwargs) -> tuple:
    return tuple(sorted((k, _freeze(v)) for k, v in kwargs.items()
                        if v is not None))


def _freeze(v):
    if isinstance(v, dict):
        return tuple((k, _freeze(x)) for k, x in v.items())
    if isinstance(v, (list, tuple)):
        return tuple(_freeze(x) for x in v)
    if isinstance(v, set):
        return tuple(sorted(_freeze(x) for x in v))
    return v


def args_dict(node: LNode) -> dict:
    return dict(node.args)


@dataclass
class LogicalDAG:
    nodes: dict[int, LNode] = field(default_factory=dict)
    edges: list[LEdge] = field(default_factory=list)
    outputs: dict[str, tuple[int, int]] = field(default_factory=dict)  # var -> (node, slot)
    stores: list[int] = field(default_factory=list)
    _next: int = 0

    # --- construction ---

    def add(self, kind: str, args: tuple = (), inputs: list = ()) -> int:
        if kind not in REGISTRY:
            raise PlanError(f"unregistered logical operator {kind!r}")
        nid = self._next
        self._next += 1
        self.nodes[nid] = LNode(nid, kind, args)
        for slot, src in enumerate(inputs):
            src_id, src_slot = src if isinstance(src, tuple) else (src, 0)
            self.edges.append(LEdge(src_id, nid, "dataflow", slot, src_slot))
        return nid

    def connect(self, src, dst: int, kind: str = "dataflow", dst_slot: int = 0):
        src_id, src_slot = src if isinstance(src, tuple) else (src, 0)
        self.edges.append(LEdge(src_id, dst, kind, dst_slot, src_slot))

    # --- views ---

    def in_edges(self, nid: int) -> list[LEdge]:
        return [e for e in self.edges if e.dst == nid]

    def out_edges(self, nid: int) -> list[LEdge]:
        return [e for e in self.edges if e.src == nid]

    def inputs(self, nid: int) -> list[LEdge]:
        return sorted((e for e in self.in_edges(nid) if e.kind == "dataflow"),
                      key=lambda e: e.dst_slot)

    def body_root(self, nid: int) -> int | None:
        subs = [e for e in self.in_edges(nid) if e.kind == "sub"]
        return subs[0].src if subs else None

    def consumers(self, nid: int) -> list[LEdge]:
        return [e for e in self.out_edges(nid) if e.kind == "dataflow"]

    def topo_order(self) -> list[int]:
        indeg = {nid: 0 for nid in self.nodes}
        for e in self.edges:
            indeg[e.dst] += 1
        ready = sorted(nid for nid, d in indeg.items() if d == 0)
        order = []
        while ready:
            nid = ready.pop(0)
            order.append(nid)
            for e in sorted(self.out_edges(nid), key=lambda e: (e.dst, e.dst_slot)):
                indeg[e.dst] -= 1
                if indeg[e.dst] == 0:
                    ready.append(e.dst)
            ready.sort()
        if len(order) != len(self.nodes):
            raise PlanError("logical plan contains a cycle")
        return order

    def validate(self):
        self.topo_order()
        for e in self.edges:
            if e.src not in self.nodes or e.dst not in self.nodes:
                raise PlanError("dangling edge")
            if e.kind == "sub" and not REGISTRY[self.nodes[e.dst].kind].higher_order:
                raise PlanError("sub-consumption edge into a first-order operator")
        for nid, node in self.nodes.items():
            subs = [e for e in self.in_edges(nid) if e.kind == "sub"]
            if REGISTRY[node.kind].higher_order:
                if len(subs) != 1:
                    raise PlanError(f"higher-order node {node.kind} needs exactly "
                                    f"one sub-operator root, has {len(subs)}")
            elif subs:
                raise PlanError(f"{node.kind} cannot consume sub-operators")

    # --- maintenance ---

    def reroute(self, old: int, new: int, new_slot_map=None):
        """Redirect all outgoing edges of `old` to come from `new`."""
        for i, e in enumerate(self.edges):
            if e.src == old:
                slot = e.src_slot if new_slot_map is None else new_slot_map(e.src_slot)
                self.edges[i] = replace(e, src=new, src_slot=slot)
        for var, (nid, slot) in list(self.outputs.items()):
            if nid == old:
                self.outputs[var] = (new, slot)

    def remove_node(self, nid: int):
        self.nodes.pop(nid, None)
        self.edges = [e for e in self.edges if e.src != nid and e.dst != nid]

    def gc(self):
        """Drop nodes unreachable from outputs and stores."""
        roots = {nid for nid, _slot in self.outputs.values()} | set(self.stores)
        seen: set[int] = set()
        stack = [r for r in roots if r in self.nodes]
        incoming: dict[int, list[LEdge]] = {nid: [] for nid in self.nodes}
        for e in self.edges:
            incoming[e.dst].append(e)
        while stack:
            nid = stack.pop()
            if nid in seen:
                continue
            seen.add(nid)
            for e in incoming.get(nid, ()):
                stack.append(e.src)
        for nid in list(self.nodes):
            if nid not in seen:
                self.remove_node(nid)
        self.outputs = {v: t for v, t in self.outputs.items() if t[0] in self.nodes}
        self.stores = [s for s in self.stores if s in self.nodes]

    def copy(self) -> "LogicalDAG":
        dag = LogicalDAG(_next=self._next)
        dag.nodes = {nid: LNode(n.id, n.kind, n.args) for nid, n in self.nodes.items()}
        dag.edges = list(self.edges)
        dag.outputs = dict(self.outputs)
        dag.stores = list(self.stores)
        return dag

    # --- canonical hashing ---

    def canonical_hash(self) -> str:
        memo: dict[tuple, str] = {}

        def node_hash(nid: int, stack: tuple[int, ...]) -> str:
            key = (nid, stack)
            if key in memo:
                return memo[key]
            node = self.nodes[nid]
            if node.kind in ("LambdaVar", "ElementRef"):
                binder = args_dict(node).get("binder")
                depth = stack[::-1].index(binder) if binder in stack else -1
                extras = tuple(kv for kv in node.args if kv[0] != "binder")
                digest = _h(node.kind, str(depth), repr(extras))
            else:
                child_stack = stack + ((nid,) if REGISTRY[node.kind].higher_order else ())
                parts = [node.kind, repr(node.args)]
                for e in self.inputs(nid):
                    parts.append(f"in{e.dst_slot}.{e.src_slot}=" +
                                 node_hash(e.src, stack))
                root = self.body_root(nid)
                if root is not None:
                    parts.append("body=" + node_hash(root, child_stack))
                digest = _h(*parts)
            memo[key] = digest
            return digest

        parts = [f"{var}:{node_hash(nid, ())}.{slot}"
                 for var, (nid, slot) in sorted(self.outputs.items())]
        parts += sorted("store:" + node_hash(s, ()) for s in self.stores)
        return _h(*parts)


def _h(*parts: str) -> str:
    return hashlib.sha256("\x1f".join(parts).encode()).hexdigest()


# --- plan construction ---------------------------------------------------------

DATAFLOW_NAMED_PARAMS = {"docid", "words"}


def build_logical_plan(ts: TypedScript) -> LogicalDAG:
    return _Builder(ts).build()


class _Builder:
    def __init__(self, ts: TypedScript):
        self.ts = ts
        self.dag = LogicalDAG()
        self.scope: dict[str, tuple[int, int]] = {}

    def build(self) -> LogicalDAG:
        for tstmt in self.ts.statements:
            stmt = tstmt.statement
            if isinstance(stmt, Store):
                self.compile_store(stmt)
            else:
                self.compile_assignment(stmt)
        self.dag.validate()
        return self.dag

    def compile_assignment(self, stmt: Assignment):
        rhs = stmt.rhs
        if isinstance(rhs, FuncCall) and not rhs.resolved.reserved \
                and len(rhs.resolved.returns) > 1:
            nid = self.compile_expr(rhs)[0]
            for slot, var in enumerate(stmt.lhs):
                self.scope[var.name] = (nid, slot)
                self.dag.outputs[var.name] = (nid, slot)
            return
        src = self.compile_expr(rhs)
        var = stmt.lhs[0].name
        self.scope[var] = src
        self.dag.outputs[var] = src

    def compile_store(self, stmt: Store):
        src = self.scope[stmt.var]
        kind = "Store2CSV" if stmt.db_name == "fs" else "Store2Relational"
        columns = tuple((c.target, c.member) for c in stmt.columns or ())
        nid = self.dag.add(kind, make_args(db=stmt.db_name, table=stmt.table_name,
                                           columns=columns, var=stmt.var),
                           [src])
        self.dag.stores.append(nid)

    # --- expressions ---

    def compile_expr(self, expr) -> tuple[int, int]:
        if isinstance(expr, Literal):
            return (self.dag.add("Const", make_args(value=expr.value,
                                                    prim=expr.prim_type)), 0)
        if isinstance(expr, ListLit):
            if all(isinstance(e, Literal) for e in expr.items):
                vals = tuple(e.value for e in expr.items)
                return (self.dag.add("Const", make_args(value=vals, prim="List")), 0)
            items = [self.compile_expr(e) for e in expr.items]
            return (self.dag.add("MakeList", (), items), 0)
        if isinstance(expr, TupleLit):
            items = [self.compile_expr(e) for e in expr.items]
            return (self.dag.add("MakeTuple", (), items), 0)
        if isinstance(expr, VarRef):
            return self.scope[expr.name]
        if isinstance(expr, UnderscoreRef):
            key = "_:" + (expr.mode or "elem")
            return self.scope[key]
        if isinstance(expr, Index):
            base = self.compile_expr(expr.base)
            if isinstance(expr.index, Literal):
                return (self.dag.add("GetElement",
                                     make_args(index=expr.index.value), [base]), 0)
            idx = self.compile_expr(expr.index)
            return (self.dag.add("GetElement", (), [base, idx]), 0)
        if isinstance(expr, Member):
            base = self.compile_expr(expr.base)
            return (self.dag.add("GetColumns", make_args(column=expr.member),
                                 [base]), 0)
        if isinstance(expr, Query):
            return self.compile_query(expr)
        if isinstance(expr, FuncCall):
            return self.compile_call(expr)
        if isinstance(expr, MapExpr):
            return self.compile_map(expr)
        if isinstance(expr, ReduceExpr):
            return self.compile_reduce(expr)
        if isinstance(expr, WhereExpr):
            return self.compile_where(expr)
        if isinstance(expr, BinCmp):
            left = self.compile_expr(expr.left)
            right = self.compile_expr(expr.right)
            return (self.dag.add("Compare", make_args(op=expr.op), [left, right]), 0)
        if isinstance(expr, Logic):
            ops = [self.compile_expr(o) for o in expr.operands]
            return (self.dag.add("Logic", make_args(op=expr.op), ops), 0)
        raise PlanError(f"cannot translate expression {type(expr).__name__}")

    def compile_query(self, expr: Query) -> tuple[int, int]:
        kind = {"sql": "ExecuteSQL", "cypher": "ExecuteCypher",
                "solr": "ExecuteSolr"}[expr.dialect]
        inputs: list[tuple[int, int]] = []
        param_slots: list[tuple[str, str | None]] = []
        if expr.engine_var is not None:
            inputs.append(self.scope[expr.engine_var])
        seen: dict[tuple[str, str | None], int] = {}
        for var, member in expr.template.params():
            key = (var, member)
            if key in seen:
                continue
            seen[key] = len(inputs)
            src = self.scope[var]
            if member is not None:
                src = (self.dag.add("GetColumns", make_args(column=member),
                                    [src]), 0)
            elif self._var_is_relation(var) and expr.dialect == "sql":
                src = (self.dag.add("CreateRelation", (), [src]), 0)
            inputs.append(src)
            param_slots.append(key)
        meta = expr.inferred
        schema = tuple((meta.relation_schema or meta.fields or {}).items())
        args = make_args(dialect=expr.dialect, engine=expr.engine_alias,
                         template=expr.template.raw,
                         params=tuple(param_slots),
                         target_var=1 if expr.engine_var is not None else 0,
                         schema=schema)
        return (self.dag.add(kind, args, inputs), 0)

    def _var_is_relation(self, var: str) -> bool:
        for tstmt in self.ts.statements:
            for name, meta in tstmt.lhs_metas:
                if name == var:
                    return meta.type.kind == "Relation"
        return False

    def compile_call(self, expr: FuncCall) -> tuple[int, int]:
        sig = expr.resolved
        kind = sig.logical_kind
        statics: dict[str, object] = {}
        inputs: list[tuple[int, int]] = [self.compile_expr(a) for a in expr.args]
        input_names: list[str] = []
        named_inputs: dict[str, tuple[int, int]] = {}
        for name, arg in expr.named.items():
            if name in DATAFLOW_NAMED_PARAMS and not isinstance(arg, Literal):
                named_inputs[name] = self.compile_expr(arg)
                continue
            value = _static_value(arg, self.ts)
            if value is None:
                raise SemanticError(
                    f"named parameter {name!r} of {expr.name} must be constant")
            statics[name] = value
        for name, (_t, default) in sig.named_params.items():
            if name not in statics and name not in named_inputs \
                    and default is not None and not _is_required(default):
                statics[name] = default
        # adapt String-column arguments into corpora for corpus-consuming operators
        corpus_ops = ("NER", "Tokenize", "Preprocess", "LDAOnCorpus",
                      "KeyphraseMining", "BuildWordNeighborGraph", "CollectWNFromDocs")
        for i, arg in enumerate(expr.args):
            wants_corpus = kind in corpus_ops and i == 0
            if wants_corpus and arg.inferred.type.kind == "List":
                docid = named_inputs.pop("docid", None)
                if docid is not None:
                    conv = self.dag.add("CreateDocumentsFromRecords", (),
                                        [inputs[i], docid])
                else:
                    conv = self.dag.add("CreateDocumentsFromList", (), [inputs[i]])
                inputs[i] = (conv, 0)
        for name, src in named_inputs.items():
            inputs.append(src)
            input_names.append(name)
        if expr.graph_template is not None:
            statics["template"] = _freeze_template(expr.graph_template)
        args = make_args(named_inputs=tuple(input_names), **statics)
        return (self.dag.add(kind, args, inputs), 0)

    def compile_map(self, expr: MapExpr) -> tuple[int, int]:
        source = self.compile_expr(expr.source)
        map_id = self.dag.add("Map", make_args(var=expr.var), [source])
        lam = self.dag.add("LambdaVar", make_args(binder=map_id, var=expr.var))
        saved = self.scope.get(expr.var)
        self.scope[expr.var] = (lam, 0)
        try:
            body = self.compile_expr(expr.body)
        finally:
            self._restore(expr.var, saved)
        self.dag.connect(body, map_id, "sub")
        return (map_id, 0)

    def compile_reduce(self, expr: ReduceExpr) -> tuple[int, int]:
        source = self.compile_expr(expr.source)
        red_id = self.dag.add("Reduce", make_args(var1=expr.var1, var2=expr.var2),
                              [source])
        saved = {v: self.scope.get(v) for v in (expr.var1, expr.var2)}
        self.scope[expr.var1] = (self.dag.add(
            "LambdaVar", make_args(binder=red_id, var=expr.var1, slot=0)), 0)
        self.scope[expr.var2] = (self.dag.add(
            "LambdaVar", make_args(binder=red_id, var=expr.var2, slot=1)), 0)
        try:
            body = self.compile_expr(expr.body)
        finally:
            for v, old in saved.items():
                self._restore(v, old)
        self.dag.connect(body, red_id, "sub")
        return (red_id, 0)

    def compile_where(self, expr: WhereExpr) -> tuple[int, int]:
        source = self.compile_expr(expr.source)
        mode = expr.iteration_mode
        filt_id = self.dag.add("Filter", make_args(mode=mode), [source])
        key = "_:" + (mode or "elem")
        ref = self.dag.add("ElementRef", make_args(binder=filt_id, mode=mode))
        saved = self.scope.get(key)
        self.scope[key] = (ref, 0)
        try:
            pred = self.compile_expr(expr.predicate)
        finally:
            self._restore(key, saved)
        self.dag.connect(pred, filt_id, "sub")
        return (filt_id, 0)

    def _restore(self, name, saved):
        if saved is None:
            self.scope.pop(name, None)
        else:
            self.scope[name] = saved


def _is_required(default) -> bool:
    from .catalog import REQUIRED
    return default is REQUIRED


def _static_value(arg, ts: TypedScript):
    if isinstance(arg, Literal):
        return arg.value
    meta = getattr(arg, "inferred", None)
    if meta is not None and meta.static_value is not None:
        return meta.static_value
    return None


def _freeze_template(t: GraphTemplate) -> tuple:
    def props(d):
        return tuple((k, c.var, c.column) for k, c in d.items())
    return ("tmpl", t.src_label, props(t.src_props), t.edge_label,
            props(t.edge_props), t.dst_label, props(t.dst_props), t.directed)


# --- Rule 1: keyword decomposition ----------------------------------------------

NER_STAGES = ("tokenize", "ssplit", "pos", "lemma", "ner")

WORD_GRAPH_TEMPLATE = ("tmpl", "Word", (("value", "", "word1"),), "Cooccur",
                       (("count", "", "count"),), "Word", (("value", "", "word2"),),
                       True)


def decompose_keywords(dag: LogicalDAG) -> LogicalDAG:
    """Rule 1: expand keyword operators into fine-grained chains, to fixpoint."""
    dag = dag.copy()
    changed = True
    while changed:
        changed = False
        for nid, node in list(dag.nodes.items()):
            if node.kind == "NER":
                _expand_ner(dag, nid)
            elif node.kind == "Tokenize":
                _replace_chain(dag, nid, [("NLPAnnotator", make_args(stage="tokenize"))])
            elif node.kind == "Preprocess":
                stop = args_dict(node).get("stopwords")
                _replace_chain(dag, nid, [
                    ("NLPAnnotator", make_args(stage="tokenize")),
                    ("FilterStopWords", make_args(stopwords=stop))])
            elif node.kind == "BuildWordNeighborGraph":
                _expand_wn_graph(dag, nid)
            elif node.kind == "ConstructGraphFromRelation":
                tmpl = args_dict(node).get("template")
                _replace_chain(dag, nid, [
                    ("CollectGraphElementsFromRelation", make_args(template=tmpl)),
                    ("CreateGraph", make_args(template=tmpl))])
            else:
                continue
            changed = True
            break
    dag.gc()
    dag.validate()
    return dag


def _replace_chain(dag: LogicalDAG, nid: int, chain: list[tuple[str, tuple]]):
    """Replace node by a linear chain; the old inputs feed the first element."""
    inputs = [(e.src, e.src_slot) for e in dag.inputs(nid)]
    prev = last = None
    for kind, args in chain:
        new_id = dag.add(kind, args, inputs if prev is None else [(prev, 0)])
        prev = last = new_id
    dag.reroute(nid, last)
    dag.remove_node(nid)


def _expand_ner(dag: LogicalDAG, nid: int):
    gaz = args_dict(dag.nodes[nid]).get("gazetteer")
    chain = [("NLPAnnotator", make_args(stage=s)) for s in NER_STAGES[:-1]]
    chain.append(("NLPAnnotator", make_args(stage="ner", gazetteer=gaz)))
    _replace_chain(dag, nid, chain)


def _expand_wn_graph(dag: LogicalDAG, nid: int):
    node = dag.nodes[nid]
    inputs = [(e.src, e.src_slot) for e in dag.inputs(nid)]
    dist = args_dict(node).get("maxDistance", 5)
    collect = dag.add("CollectWNFromDocs",
                      make_args(maxDistance=dist,
                                named_inputs=("words",)), inputs)
    create = dag.add("CreateGraph", make_args(template=WORD_GRAPH_TEMPLATE),
                     [(collect, 0)])
    dag.reroute(nid, create)
    dag.remove_node(nid)


# --- Rule 2: redundancy elimination ---------------------------------------------

def eliminate_redundancy(dag: LogicalDAG) -> LogicalDAG:
    """Rule 2: merge pure nodes with identical kind, args, and inputs."""
    dag = dag.copy()
    changed = True
    while changed:
        changed = False
        groups: dict[tuple, list[int]] = {}
        for nid, node in dag.nodes.items():
            spec = REGISTRY[node.kind]
            if not (spec.pure and spec.mergeable):
                continue
            sig = (node.kind, node.args,
                   tuple((e.dst_slot, e.src, e.src_slot) for e in dag.inputs(nid)))
            groups.setdefault(sig, []).append(nid)
        for sig, members in groups.items():
            if len(members) < 2:
                continue
            members.sort()
            survivor = members[0]
            for loser in members[1:]:
                dag.reroute(loser, survivor)
                dag.remove_node(loser)
            changed = True
    dag.gc()
    dag.validate()
    return dag


# --- Rule 3: operator fusion -----------------------------------------------------

def fuse_operators(dag: LogicalDAG) -> LogicalDAG:
    """Rule 3: fuse consecutive single-consumer Maps and NLP annotator runs."""
    dag = dag.copy()
    changed = True
    while changed:
        changed = _fuse_one_map(dag) or _fuse_one_annotator(dag)
    dag.gc()
    dag.validate()
    return dag


def _sole_consumer(dag: LogicalDAG, nid: int) -> int | None:
    """The unique dataflow consumer, or None; sub-consumption blocks fusion."""
    outs = dag.out_edges(nid)
    if len(outs) != 1 or outs[0].kind != "dataflow":
        return None
    return outs[0].dst


def _fuse_one_map(dag: LogicalDAG) -> bool:
    for nid, node in list(dag.nodes.items()):
        if node.kind != "Map":
            continue
        consumer = _sole_consumer(dag, nid)
        if consumer is None or nid in dag.stores:
            continue
        cnode = dag.nodes.get(consumer)
        if cnode is None or cnode.kind != "Map":
            continue
        # the edge must feed the consumer's source slot (slot 0)
        edge = dag.out_edges(nid)[0]
        if edge.dst_slot != 0:
            continue
        _fuse_maps(dag, nid, consumer)
        return True
    return False


def _fuse_maps(dag: LogicalDAG, m1: int, m2: int):
    body1 = dag.body_root(m1)
    lam2 = [nid for nid, n in dag.nodes.items()
            if n.kind == "LambdaVar" and args_dict(n).get("binder") == m2]
    # m2's lambda references now read m1's body root (this also covers the
    # identity-map case where the lambda itself was m2's body root)
    for lam in lam2:
        dag.reroute(lam, body1)
        dag.remove_node(lam)
    body2 = dag.body_root(m2)
    # m1 takes m2's body as its own root
    dag.edges = [e for e in dag.edges if not (e.kind == "sub" and e.dst in (m1, m2))]
    dag.connect(body2, m1, "sub")
    # drop the m1 variable binding: the intermediate list is no longer materialized
    for var, (nid, _slot) in list(dag.outputs.items()):
        if nid == m1:
            del dag.outputs[var]
    dag.reroute(m2, m1)
    dag.remove_node(m2)


def _fuse_one_annotator(dag: LogicalDAG) -> bool:
    for nid, node in list(dag.nodes.items()):
        if node.kind not in ("NLPAnnotator", "NLPPipeline"):
            continue
        consumer = _sole_consumer(dag, nid)
        if consumer is None or nid in dag.stores:
            continue
        cnode = dag.nodes.get(consumer)
        if cnode is None or cnode.kind not in ("NLPAnnotator", "NLPPipeline"):
            continue
        if dag.out_edges(nid)[0].dst_slot != 0:
            continue
        stages = _stages_of(node) + _stages_of(cnode)
        inputs = [(e.src, e.src_slot) for e in dag.inputs(nid)]
        fused = dag.add("NLPPipeline", make_args(stages=stages), inputs)
        for var, (onid, slot) in list(dag.outputs.items()):
            if onid == nid:
                del dag.outputs[var]
        dag.reroute(consumer, fused)
        dag.remove_node(nid)
        dag.remove_node(consumer)
        return True
    return False


def _stages_of(node: LNode) -> tuple:
    args = args_dict(node)
    if node.kind == "NLPAnnotator":
        return ((args.get("stage"), node.args),)
    return args.get("stages", ())


# --- combined optimizer -----------------------------------------------------------

RULES = {
    "decompose": decompose_keywords,
    "eliminate": eliminate_redundancy,
    "fuse": fuse_operators,
}


def optimize_logical(dag: LogicalDAG,
                     order: tuple[str, ...] = ("decompose", "eliminate", "fuse"),
                     max_rounds: int = 20) -> LogicalDAG:
    """Apply the rewrite rules in the given order, each to fixpoint, repeating
    until the plan stops changing (joint fixpoint)."""
    current = dag
    prev_hash = None
    for _ in range(max_rounds):
        for name in order:
            current = RULES[name](current)
        h = current.canonical_hash()
        if h == prev_hash:
            break
        prev_hash = h
    return current


# --- DOT rendering ------------------------------------------------------------------

def to_dot(dag: LogicalDAG, title: str = "logical") -> str:
    lines = [f"digraph {title} {{", "  rankdir=BT;"]
    for nid, node in sorted(dag.nodes.items()):
        label = node.kind
        args = args_dict(node)
        if node.kind == "NLPAnnotator":
            label += f"({args.get('stage')})"
        elif node.kind == "NLPPipeline":
            label += "(" + "+".join(s for s, _a in args.get("stages", ())) + ")"
        elif node.kind == "Const":
            label += f"({args.get('value')!r})"
        elif "engine" in args:
            label += f"@{args['engine']}"
        vars_here = [v for v, (onid, _s) in dag.outputs.items() if onid == nid]
        if vars_here:
            label += "\\n→ " + ",".join(sorted(vars_here))
        lines.append(f'  n{nid} [label="{label}"];')
    for e in dag.edges:
        style = "solid" if e.kind == "dataflow" else "dashed"
        lines.append(f"  n{e.src} -> n{e.dst} [style={style}];")
    lines.append("}")
    return "\n".join(lines)
