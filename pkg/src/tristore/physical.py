"""Physical planning: pattern-based candidate generation, partitioned data
parallelism insertion, buffered chain partitioning, and the pipeline-vs-DP
time analysis.

Candidate plans are a physical DAG (``pg``) whose matched multi-alternative
sub-DAGs are collapsed into *virtual inflated nodes*, plus a map (``pm``)
from virtual-node id to the list of alternative physical sub-plans.  Patterns
are matched from the largest key to the smallest; unmatched logical operators
fall back to their default one-node translation.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace

from .errors import DomainError, NoTranslation, PlanError
from .logical import LEdge, LNode, LogicalDAG, REGISTRY as LREGISTRY, args_dict, make_args

# --- physical operator registry ------------------------------------------------

@dataclass(frozen=True)
class PhysSpec:
    """Data-parallel capability (ST/PR/EX), buffering capability (SI/SO/B/SS),
    the capOn input slots, and how partitioned partial results merge."""
    dp: str = "ST"
    dp_capon: int | None = None
    buf: str = "B"
    buf_capon: int | None = None
    merge: str = "concat"   # concat | sum_counts | entity_union | sum
    outputs: int = 1


PHYS_REGISTRY: dict[str, PhysSpec] = {
    # queries (external engines manage their own execution)
    "ExecuteSQL@Engine": PhysSpec("EX", None, "B"),
    "ExecuteSQL@Served": PhysSpec("EX", None, "B"),
    "ExecuteSQL@Local": PhysSpec("EX", None, "B"),
    "ExecuteSQL@InMemory": PhysSpec("EX", None, "B"),
    "ExecuteCypher@Engine": PhysSpec("EX", None, "B"),
    "ExecuteCypher@Value": PhysSpec("EX", None, "B"),
    "ExecuteSolr@Engine": PhysSpec("EX", None, "B"),
    # data movement
    "Relation2Engine": PhysSpec("ST", None, "SI"),
    "EngineTable2Local": PhysSpec("ST", None, "SO"),
    "Graph2Engine": PhysSpec("ST", None, "B"),
    # graph construction and analytics
    "CollectWNFromDocs@Native": PhysSpec("PR", 0, "SI", 0, merge="sum_counts"),
    "CollectGraphElementsFromRelation@Native": PhysSpec("PR", 0, "SS", 0),
    "CreateGraph@InMemoryLib": PhysSpec("ST", None, "SI"),
    "CreateGraph@GraphEngine": PhysSpec("ST", None, "SI"),
    "PageRank@InMemoryLib": PhysSpec("EX", None, "B"),
    "PageRank@GraphEngine": PhysSpec("EX", None, "B"),
    "Betweenness@InMemoryLib": PhysSpec("EX", None, "B"),
    "Betweenness@GraphEngine": PhysSpec("EX", None, "B"),
    # NLP kernels
    "NLPAnnotator@Native": PhysSpec("PR", 0, "SS", 0, merge="entity_union"),
    "NLPPipeline@Native": PhysSpec("PR", 0, "SS", 0, merge="entity_union"),
    "FilterStopWords@Native": PhysSpec("PR", 0, "SS", 0),
    "LDAOnCorpus@Native": PhysSpec("EX", None, "B", outputs=2),
    "LDAOnTextMatrix@Native": PhysSpec("EX", None, "B", outputs=2),
    "SVD@Native": PhysSpec("EX", None, "B", outputs=3),
    "KeyphraseMining@Native": PhysSpec("EX", None, "B"),
    "CreateDocumentsFromRecords@Native": PhysSpec("ST", None, "SS"),
    "CreateDocumentsFromList@Native": PhysSpec("ST", None, "SS"),
    # relational/matrix/collection operators
    "GetColumns@Local": PhysSpec("ST", None, "SS"),
    "GetElement@Local": PhysSpec("ST", None, "B"),
    "GetValueByIndices@Local": PhysSpec("ST", None, "B"),
    "GetValueByKeys@Local": PhysSpec("ST", None, "B"),
    "GetRowsByIndices@Local": PhysSpec("ST", None, "B"),
    "GetRowsByKeys@Local": PhysSpec("ST", None, "B"),
    "GetColsByIndices@Local": PhysSpec("ST", None, "B"),
    "GetColsByKeys@Local": PhysSpec("ST", None, "B"),
    "RowKeys@Local": PhysSpec("ST", None, "B"),
    "ColumnKeys@Local": PhysSpec("ST", None, "B"),
    "SumList@Native": PhysSpec("PR", 0, "SI", 0, merge="sum"),
    "SumColumn@Native": PhysSpec("PR", 0, "SI", 0, merge="sum"),
    "SumMatrix@Native": PhysSpec("PR", 0, "SI", 0, merge="sum"),
    "SumVector@Native": PhysSpec("PR", 0, "SI", 0, merge="sum"),
    "Range@Local": PhysSpec("ST", None, "SO"),
    "Union@Local": PhysSpec("ST", None, "B"),
    "StringReplace@Local": PhysSpec("ST", None, "B"),
    "StringJoin@Local": PhysSpec("ST", None, "B"),
    "ToList@Local": PhysSpec("ST", None, "SS"),
    "MakeList@Local": PhysSpec("ST", None, "B"),
    "MakeTuple@Local": PhysSpec("ST", None, "B"),
    "Const@Local": PhysSpec("ST", None, "B"),
    "Compare@Local": PhysSpec("ST", None, "B"),
    "Logic@Local": PhysSpec("ST", None, "B"),
    # higher-order coordinators
    "Map@Coordinator": PhysSpec("ST", None, "B"),
    "Reduce@Coordinator": PhysSpec("ST", None, "B"),
    "Filter@Coordinator": PhysSpec("ST", None, "B"),
    "LambdaVar@Local": PhysSpec("ST", None, "B"),
    "ElementRef@Local": PhysSpec("ST", None, "B"),
    # stores
    "Store2Relational@Engine": PhysSpec("ST", None, "SI"),
    "Store2Graph@Engine": PhysSpec("ST", None, "SI"),
    "Store2CSV@Local": PhysSpec("ST", None, "SI"),
    # DP plumbing
    "Partition": PhysSpec("ST", None, "B"),
    "Merge": PhysSpec("ST", None, "B"),
    # sub-plan placeholder for data arriving from outside the sub-plan
    "ExternalInput": PhysSpec("ST", None, "B"),
}

DEFAULT_TRANSLATION: dict[str, str] = {
    "ExecuteSolr": "ExecuteSolr@Engine",
    "CollectWNFromDocs": "CollectWNFromDocs@Native",
    "CollectGraphElementsFromRelation": "CollectGraphElementsFromRelation@Native",
    "CreateGraph": "CreateGraph@InMemoryLib",
    "PageRank": "PageRank@InMemoryLib",
    "Betweenness": "Betweenness@InMemoryLib",
    "GetColumns": "GetColumns@Local",
    "LDAOnCorpus": "LDAOnCorpus@Native",
    "LDAOnTextMatrix": "LDAOnTextMatrix@Native",
    "SVD": "SVD@Native",
    "KeyphraseMining": "KeyphraseMining@Native",
    "NLPAnnotator": "NLPAnnotator@Native",
    "NLPPipeline": "NLPPipeline@Native",
    "FilterStopWords": "FilterStopWords@Native",
    "GetValueByIndices": "GetValueByIndices@Local",
    "GetValueByKeys": "GetValueByKeys@Local",
    "GetRowsByIndices": "GetRowsByIndices@Local",
    "GetRowsByKeys": "GetRowsByKeys@Local",
    "GetColsByIndices": "GetColsByIndices@Local",
    "GetColsByKeys": "GetColsByKeys@Local",
    "RowKeys": "RowKeys@Local",
    "ColumnKeys": "ColumnKeys@Local",
    "SumList": "SumList@Native",
    "SumColumn": "SumColumn@Native",
    "SumMatrix": "SumMatrix@Native",
    "SumVector": "SumVector@Native",
    "Range": "Range@Local",
    "Map": "Map@Coordinator",
    "Reduce": "Reduce@Coordinator",
    "Filter": "Filter@Coordinator",
    "Compare": "Compare@Local",
    "Logic": "Logic@Local",
    "Store2Relational": "Store2Relational@Engine",
    "Store2Graph": "Store2Graph@Engine",
    "Store2CSV": "Store2CSV@Local",
    "Const": "Const@Local",
    "Union": "Union@Local",
    "StringReplace": "StringReplace@Local",
    "StringJoin": "StringJoin@Local",
    "ToList": "ToList@Local",
    "CreateDocumentsFromRecords": "CreateDocumentsFromRecords@Native",
    "CreateDocumentsFromList": "CreateDocumentsFromList@Native",
    "MakeList": "MakeList@Local",
    "MakeTuple": "MakeTuple@Local",
    "GetElement": "GetElement@Local",
    "LambdaVar": "LambdaVar@Local",
    "ElementRef": "ElementRef@Local",
}


# --- physical DAG ----------------------------------------------------------------

@dataclass
class PNode:
    id: int
    kind: str
    args: tuple = ()
    virtual: bool = False
    outputs: int = 1

    def spec(self) -> PhysSpec:
        if self.virtual:
            return PhysSpec("ST", None, "B", outputs=self.outputs)
        if self.kind not in PHYS_REGISTRY:
            raise NoTranslation(f"no physical spec for {self.kind!r}")
        return PHYS_REGISTRY[self.kind]


@dataclass
class PhysicalDAG:
    nodes: dict[int, PNode] = field(default_factory=dict)
    edges: list[LEdge] = field(default_factory=list)
    outputs: dict[str, tuple[int, int]] = field(default_factory=dict)
    stores: list[int] = field(default_factory=list)
    _next: int = 0

    def add(self, kind: str, args: tuple = (), inputs: list = (),
            virtual: bool = False, outputs: int = 1) -> int:
        nid = self._next
        self._next += 1
        self.nodes[nid] = PNode(nid, kind, args, virtual, outputs)
        for slot, src in enumerate(inputs):
            src_id, src_slot = src if isinstance(src, tuple) else (src, 0)
            self.edges.append(LEdge(src_id, nid, "dataflow", slot, src_slot))
        return nid

    def connect(self, src, dst: int, kind: str = "dataflow", dst_slot: int = 0):
        src_id, src_slot = src if isinstance(src, tuple) else (src, 0)
        self.edges.append(LEdge(src_id, dst, kind, dst_slot, src_slot))

    def in_edges(self, nid):
        return [e for e in self.edges if e.dst == nid]

    def out_edges(self, nid):
        return [e for e in self.edges if e.src == nid]

    def inputs(self, nid):
        return sorted((e for e in self.in_edges(nid) if e.kind == "dataflow"),
                      key=lambda e: e.dst_slot)

    def body_root(self, nid):
        subs = [e for e in self.in_edges(nid) if e.kind == "sub"]
        return subs[0].src if subs else None

    def consumers(self, nid):
        return [e for e in self.out_edges(nid) if e.kind == "dataflow"]

    def topo_order(self) -> list[int]:
        indeg = {nid: 0 for nid in self.nodes}
        for e in self.edges:
            indeg[e.dst] += 1
        ready = sorted(n for n, d in indeg.items() if d == 0)
        order = []
        while ready:
            nid = ready.pop(0)
            order.append(nid)
            for e in self.out_edges(nid):
                indeg[e.dst] -= 1
                if indeg[e.dst] == 0:
                    ready.append(e.dst)
            ready.sort()
        if len(order) != len(self.nodes):
            raise PlanError("physical plan contains a cycle")
        return order

    def reroute_output(self, old: int, new: int, slot_map=None):
        for i, e in enumerate(self.edges):
            if e.src == old:
                slot = e.src_slot if slot_map is None else slot_map(e.src_slot)
                self.edges[i] = replace(e, src=new, src_slot=slot)
        for var, (nid, slot) in list(self.outputs.items()):
            if nid == old:
                self.outputs[var] = (new, slot if slot_map is None else slot_map(slot))

    def remove_node(self, nid: int):
        self.nodes.pop(nid, None)
        self.edges = [e for e in self.edges if e.src != nid and e.dst != nid]

    def copy(self) -> "PhysicalDAG":
        dag = PhysicalDAG(_next=self._next)
        dag.nodes = {nid: PNode(n.id, n.kind, n.args, n.virtual, n.outputs)
                     for nid, n in self.nodes.items()}
        dag.edges = list(self.edges)
        dag.outputs = dict(self.outputs)
        dag.stores = list(self.stores)
        return dag


@dataclass
class SubPlan:
    """One physical alternative for a virtual node.

    ``ExternalInput`` nodes stand for the virtual node's inputs (arg ``index``);
    ``out_slots`` lists, per virtual output slot, the producing (node, slot).
    """
    label: str
    dag: PhysicalDAG
    out_slots: list[tuple[int, int]]


@dataclass
class CandidatePlans:
    pg: PhysicalDAG
    pm: dict[int, list[SubPlan]] = field(default_factory=dict)

    def validate(self):
        self.pg.topo_order()
        for vid, subs in self.pm.items():
            if vid not in self.pg.nodes or not self.pg.nodes[vid].virtual:
                raise PlanError("pm entry does not reference a virtual node")
            if len(subs) < 2:
                raise PlanError("virtual nodes require at least two alternatives")


# --- patterns --------------------------------------------------------------------

@dataclass
class Pattern:
    name: str
    size: int
    matcher: object   # fn(LogicalDAG, anchor_id, regions) -> dict | None
    builder: object   # fn(LogicalDAG, match) -> list[SubPlan] | None (None => default)


def base_kind(kind: str) -> str:
    """Logical kind name of a (possibly translated) physical kind."""
    return kind.split("@", 1)[0]


def compute_regions(dag) -> dict[int, frozenset[int]]:
    """Innermost higher-order context of every node: the set of binders the
    node's evaluation depends on.  Works on logical and physical DAGs."""
    deps: dict[int, frozenset[int]] = {}
    incoming: dict[int, list[LEdge]] = {nid: [] for nid in dag.nodes}
    for e in dag.edges:
        if e.kind == "dataflow":
            incoming[e.dst].append(e)
    roots = {nid: dag.body_root(nid) for nid in dag.nodes}
    for nid in dag.topo_order():
        node = dag.nodes[nid]
        if base_kind(node.kind) in ("LambdaVar", "ElementRef"):
            binder = args_dict(node).get("binder")
            deps[nid] = frozenset([binder] if binder is not None else [])
            continue
        acc: set[int] = set()
        for e in incoming[nid]:
            acc |= deps.get(e.src, frozenset())
        if _is_higher_order(dag, nid):
            # a body's dependence on enclosing binders leaks to the node itself
            root = roots[nid]
            if root is not None:
                acc |= deps.get(root, frozenset())
            acc.discard(nid)
        deps[nid] = frozenset(acc)
    # body roots of a HO node execute inside it even without a binder reference
    for nid in dag.nodes:
        root = dag.body_root(nid)
        if root is not None:
            deps[root] = deps[root] | frozenset([nid])
    return deps


def _is_higher_order(dag, nid) -> bool:
    spec = LREGISTRY.get(base_kind(dag.nodes[nid].kind))
    return spec.higher_order if spec is not None else False


# --- shipped pattern set -----------------------------------------------------------

def _match_cross_engine_sql(dag: LogicalDAG, anchor: int, regions):
    node = dag.nodes[anchor]
    if node.kind != "ExecuteSQL":
        return None
    creates = [e.src for e in dag.inputs(anchor)
               if dag.nodes[e.src].kind == "CreateRelation"]
    if not creates:
        return None
    matched = [anchor] + creates
    region = regions.get(anchor)
    for c in creates:
        if regions.get(c) != region:
            return None
        if len(dag.consumers(c)) != 1:
            return None
    # external edge i corresponds to the query's input slot i; CreateRelation
    # inputs are replaced by the underlying relation producer
    ext_edges = []
    for e in dag.inputs(anchor):
        if e.src in creates:
            ext_edges.append(dag.inputs(e.src)[0])
        else:
            ext_edges.append(e)
    return {"nodes": matched, "query": anchor, "creates": creates,
            "ext_edges": ext_edges}


def _match_graph_algos(dag: LogicalDAG, anchor: int, regions):
    """CreateGraph feeding exactly {PageRank, Betweenness} (P2, size 3)."""
    node = dag.nodes[anchor]
    if node.kind != "CreateGraph":
        return None
    consumers = dag.consumers(anchor)
    kinds = sorted(dag.nodes[e.dst].kind for e in consumers)
    if kinds != ["Betweenness", "PageRank"]:
        return None
    pr = next(e.dst for e in consumers if dag.nodes[e.dst].kind == "PageRank")
    bw = next(e.dst for e in consumers if dag.nodes[e.dst].kind == "Betweenness")
    if len({regions.get(anchor), regions.get(pr), regions.get(bw)}) != 1:
        return None
    return {"nodes": [anchor, pr, bw], "create": anchor, "pagerank": pr,
            "betweenness": bw, "ext_edges": dag.inputs(anchor)}


def _match_graph_cypher(dag: LogicalDAG, anchor: int, regions):
    node = dag.nodes[anchor]
    if node.kind != "CreateGraph":
        return None
    consumers = dag.consumers(anchor)
    if len(consumers) != 1:
        return None
    q = consumers[0].dst
    qnode = dag.nodes[q]
    if qnode.kind != "ExecuteCypher" or not args_dict(qnode).get("target_var"):
        return None
    if consumers[0].dst_slot != 0:
        return None
    if regions.get(anchor) != regions.get(q):
        return None
    ext_edges = dag.inputs(anchor) + dag.inputs(q)[1:]
    return {"nodes": [anchor, q], "create": anchor, "query": q,
            "ext_edges": ext_edges}


def _match_graph_pagerank(dag: LogicalDAG, anchor: int, regions):
    node = dag.nodes[anchor]
    if node.kind != "CreateGraph":
        return None
    consumers = dag.consumers(anchor)
    if len(consumers) != 1 or dag.nodes[consumers[0].dst].kind != "PageRank":
        return None
    pr = consumers[0].dst
    if regions.get(anchor) != regions.get(pr):
        return None
    return {"nodes": [anchor, pr], "create": anchor, "pagerank": pr,
            "ext_edges": dag.inputs(anchor)}


def _build_cross_engine_sql(dag: LogicalDAG, match) -> list[SubPlan]:
    from .querylang import parse_sql, sql_columns_used
    from .ast_nodes import parse_template

    qnode = dag.nodes[match["query"]]
    qargs = args_dict(qnode)
    engine = qargs.get("engine")
    template = qargs.get("template")
    sel = parse_sql(parse_template(template))
    base_tables = [t for t in sel.tables if t.param is None]
    used = sql_columns_used(sel)

    def used_columns(tref):
        cols = []
        for c in used:
            if c.table == tref.binding or c.table is None:
                cols.append(c.name)
        return sorted(set(cols))

    # external input i corresponds to the query's input slot i
    in_edges = dag.inputs(match["query"])
    create_slots = [e.dst_slot for e in in_edges if e.src in match["creates"]]
    n_inputs = len(in_edges)

    def exec_args(target_kind, exec_engine):
        return make_args(**{**dict(qnode.args), "exec_engine": exec_engine,
                            "exec_kind": target_kind})

    subs = []
    # (c) move every base table fully to the local engine, execute there
    dagc = PhysicalDAG()
    ext_c = [dagc.add("ExternalInput", make_args(index=i)) for i in range(n_inputs)]
    pulls = [dagc.add("EngineTable2Local",
                      make_args(src=engine, table=t.name, dst="__local__"))
             for t in base_tables]
    q_inputs = []
    for i in range(n_inputs):
        if i in create_slots:
            q_inputs.append((dagc.add("Relation2Engine",
                                      make_args(dst="__local__"), [(ext_c[i], 0)]), 0))
        else:
            q_inputs.append((ext_c[i], 0))
    qid = dagc.add("ExecuteSQL@Local", exec_args("local", "__local__"), q_inputs)
    for p in pulls:
        dagc.connect((p, 0), qid, "dataflow", dst_slot=n_inputs + pulls.index(p))
    subs.append(SubPlan("local-full", dagc, [(qid, 0)]))

    # (b) move only the referenced columns into the in-memory engine
    dagb = PhysicalDAG()
    ext_b = [dagb.add("ExternalInput", make_args(index=i)) for i in range(n_inputs)]
    pulls_b = [dagb.add("EngineTable2Local",
                        make_args(src=engine, table=t.name, dst="__scratch__",
                                  columns=tuple(used_columns(t))))
               for t in base_tables]
    q_inputs = []
    for i in range(n_inputs):
        if i in create_slots:
            q_inputs.append((dagb.add("Relation2Engine",
                                      make_args(dst="__scratch__"), [(ext_b[i], 0)]), 0))
        else:
            q_inputs.append((ext_b[i], 0))
    qid_b = dagb.add("ExecuteSQL@InMemory", exec_args("inmemory", "__scratch__"),
                     q_inputs)
    for j, p in enumerate(pulls_b):
        dagb.connect((p, 0), qid_b, "dataflow", dst_slot=n_inputs + j)
    subs.append(SubPlan("in-memory", dagb, [(qid_b, 0)]))

    # (a) ship parameter relations to the declared engine, execute there
    daga = PhysicalDAG()
    ext_a = [daga.add("ExternalInput", make_args(index=i)) for i in range(n_inputs)]
    q_inputs = []
    for i in range(n_inputs):
        if i in create_slots:
            q_inputs.append((daga.add("Relation2Engine", make_args(dst=engine),
                                      [(ext_a[i], 0)]), 0))
        else:
            q_inputs.append((ext_a[i], 0))
    qid_a = daga.add("ExecuteSQL@Served", exec_args("engine", engine), q_inputs)
    subs.append(SubPlan("at-engine", daga, [(qid_a, 0)]))
    return subs


def _graph_algo_subplans(dag: LogicalDAG, match) -> list[SubPlan]:
    create = dag.nodes[match["create"]]
    algos = [(k, match[k]) for k in ("pagerank", "betweenness") if k in match]

    def build(flavor: str) -> SubPlan:
        sp = PhysicalDAG()
        ext = sp.add("ExternalInput", make_args(index=0))
        cg = sp.add(f"CreateGraph@{flavor}", create.args, [(ext, 0)])
        outs = []
        for kind_key, nid in algos:
            args = dag.nodes[nid].args
            op = "PageRank" if kind_key == "pagerank" else "Betweenness"
            outs.append((sp.add(f"{op}@{flavor}", args, [(cg, 0)]), 0))
        return SubPlan(flavor, sp, outs)

    return [build("InMemoryLib"), build("GraphEngine")]


def _build_graph_algos(dag, match):
    return _graph_algo_subplans(dag, match)


def _build_graph_pagerank(dag, match):
    return _graph_algo_subplans(dag, match)


def _build_graph_cypher(dag: LogicalDAG, match) -> list[SubPlan]:
    create = dag.nodes[match["create"]]
    query = dag.nodes[match["query"]]
    n_inputs = len(match["ext_edges"])

    def build(flavor: str, exec_kind: str) -> SubPlan:
        sp = PhysicalDAG()
        ext = [sp.add("ExternalInput", make_args(index=i)) for i in range(n_inputs)]
        cg = sp.add(f"CreateGraph@{flavor}", create.args, [(ext[0], 0)])
        inputs = [(cg, 0)] + [(ext[i], 0) for i in range(1, n_inputs)]
        qid = sp.add(exec_kind, query.args, inputs)
        return SubPlan(flavor, sp, [(qid, 0)])

    return [build("InMemoryLib", "ExecuteCypher@Value"),
            build("GraphEngine", "ExecuteCypher@Engine")]


PATTERNS: list[Pattern] = [
    Pattern("graph-create-pagerank-betweenness", 3, _match_graph_algos,
            _build_graph_algos),
    Pattern("cross-engine-sql", 2, _match_cross_engine_sql,
            _build_cross_engine_sql),
    Pattern("graph-create-cypher", 2, _match_graph_cypher, _build_graph_cypher),
    Pattern("graph-create-pagerank", 2, _match_graph_pagerank,
            _build_graph_pagerank),
]


# --- Algorithm 2: candidate physical plan generation --------------------------------

def generate_candidates(dag: LogicalDAG,
                        patterns: list[Pattern] | None = None) -> CandidatePlans:
    patterns = sorted(patterns if patterns is not None else PATTERNS,
                      key=lambda p: -p.size)
    regions = compute_regions(dag)

    pg = PhysicalDAG(_next=dag._next)
    for nid, node in dag.nodes.items():
        pg.nodes[nid] = PNode(nid, node.kind, node.args)
    pg.edges = list(dag.edges)
    pg.outputs = dict(dag.outputs)
    pg.stores = list(dag.stores)

    pm: dict[int, list[SubPlan]] = {}
    consumed: set[int] = set()

    # reverse topological order gives deterministic, consumer-first anchoring
    order = list(reversed(dag.topo_order()))
    for pat in patterns:
        for anchor in order:
            if anchor in consumed or anchor not in pg.nodes:
                continue
            match = pat.matcher(dag, anchor, regions)
            if match is None or any(n in consumed for n in match["nodes"]):
                continue
            subs = pat.builder(dag, match)
            consumed.update(match["nodes"])
            if len(subs) == 1:
                _inline_subplan(pg, match, subs[0])
            else:
                _make_virtual(pg, pm, dag, match, subs, pat.name)

    # default one-node translation for everything left untouched
    for nid, node in list(pg.nodes.items()):
        if node.virtual or node.kind in PHYS_REGISTRY:
            continue
        node.kind = _default_kind(pg, dag, nid, node)
        node.outputs = PHYS_REGISTRY[node.kind].outputs
    plans = CandidatePlans(pg, pm)
    plans.pg.topo_order()
    return plans


def _default_kind(pg: PhysicalDAG, dag: LogicalDAG, nid: int, node: PNode) -> str:
    kind = node.kind
    if kind == "ExecuteSQL":
        return "ExecuteSQL@Engine"
    if kind == "ExecuteCypher":
        return ("ExecuteCypher@Value" if args_dict(node).get("target_var")
                else "ExecuteCypher@Engine")
    if kind == "CreateRelation":
        # register the relation at the engine of the consuming query
        for e in pg.consumers(nid):
            consumer = pg.nodes[e.dst]
            engine = args_dict(consumer).get("engine")
            if engine is not None:
                node.args = make_args(dst=engine)
                break
        return "Relation2Engine"
    mapped = DEFAULT_TRANSLATION.get(kind)
    if mapped is None:
        raise NoTranslation(f"logical operator {kind!r} has no default pattern")
    return mapped


def _inline_subplan(pg: PhysicalDAG, match, sub: SubPlan):
    _splice_subplan(pg, match, sub)


def _splice_subplan(pg: PhysicalDAG, match, sub: SubPlan) -> dict[int, int]:
    """Copy a sub-plan into pg, wiring ExternalInputs to the match's external
    producers and rerouting the matched nodes' consumers to the sub outputs."""
    ext_edges = match["ext_edges"]
    mapping: dict[int, int] = {}
    for snid in sub.dag.topo_order():
        snode = sub.dag.nodes[snid]
        if snode.kind == "ExternalInput":
            continue
        inputs = []
        for e in sub.dag.inputs(snid):
            src = sub.dag.nodes[e.src]
            if src.kind == "ExternalInput":
                ext = ext_edges[args_dict(src)["index"]]
                inputs.append((ext.src, ext.src_slot))
            else:
                inputs.append((mapping[e.src], e.src_slot))
        mapping[snid] = pg.add(snode.kind, snode.args, inputs,
                               outputs=snode.outputs)
    # reroute consumers of the matched sub-DAG outputs
    outs = {}  # old node -> (new node, slot map)
    for out_idx, (snid, s_slot) in enumerate(sub.out_slots):
        outs[out_idx] = (mapping[snid], s_slot)
    # match outputs in pattern declaration order: nodes[0] is the anchor result
    produced = _match_outputs(match)
    for out_idx, old in enumerate(produced):
        new, s_slot = outs[out_idx]
        pg.reroute_output(old, new, slot_map=lambda _s, ss=s_slot: ss)
    _drop_swallowed_bindings(pg, match["nodes"])
    for old in match["nodes"]:
        pg.remove_node(old)
    return mapping


def _match_outputs(match) -> list[int]:
    """Matched nodes whose results the rest of the plan consumes, in the order
    the builders declare their out_slots."""
    if "query" in match:
        return [match["query"]]
    out = []
    if "pagerank" in match:
        out.append(match["pagerank"])
    if "betweenness" in match:
        out.append(match["betweenness"])
    return out


def _make_virtual(pg: PhysicalDAG, pm, dag, match, subs: list[SubPlan], name: str):
    ext_edges = match["ext_edges"]
    produced = _match_outputs(match)
    vid = pg.add("Virtual:" + name, make_args(pattern=name),
                 [(e.src, e.src_slot) for e in ext_edges],
                 virtual=True, outputs=len(produced))
    for out_idx, old in enumerate(produced):
        pg.reroute_output(old, vid, slot_map=lambda _s, oi=out_idx: oi)
    _drop_swallowed_bindings(pg, match["nodes"])
    for old in match["nodes"]:
        pg.remove_node(old)
    pm[vid] = subs


def _drop_swallowed_bindings(pg: PhysicalDAG, matched: list[int]):
    """Variables bound to pattern-internal nodes are no longer materialized."""
    for var, (nid, _slot) in list(pg.outputs.items()):
        if nid in matched:
            del pg.outputs[var]


# --- data parallelism insertion ------------------------------------------------------

def add_data_parallelism(plans: CandidatePlans) -> CandidatePlans:
    """Insert Partition/Merge around PR operators in pg and in every pm
    sub-plan.  EX operators manage their own parallelism and, like ST ones,
    must never receive partitioned input."""
    out = CandidatePlans(plans.pg.copy(), {})
    _insert_dp(out.pg)
    for vid, subs in plans.pm.items():
        new_subs = []
        for sub in subs:
            nsub = SubPlan(sub.label, sub.dag.copy(), list(sub.out_slots))
            _insert_dp(nsub.dag)
            new_subs.append(nsub)
        out.pm[vid] = new_subs
    return out


def _insert_dp(pdag: PhysicalDAG):
    partitioned: dict[tuple[int, int], bool] = {}

    for nid in pdag.topo_order():
        node = pdag.nodes.get(nid)
        if node is None:
            continue
        spec = node.spec()
        in_edges = list(pdag.in_edges(nid))
        if spec.dp == "PR":
            capon = spec.dp_capon if spec.dp_capon is not None else 0
            for e in in_edges:
                part = partitioned.get((e.src, e.src_slot), False)
                if e.kind != "dataflow":
                    if part:
                        _insert_on_edge(pdag, e, "Merge", partitioned, False)
                    continue
                if e.dst_slot == capon and not part:
                    _insert_on_edge(pdag, e, "Partition", partitioned, True)
                elif e.dst_slot != capon and part:
                    _insert_on_edge(pdag, e, "Merge", partitioned, False)
            for s in range(node.outputs):
                partitioned[(nid, s)] = True
        else:
            for e in in_edges:
                if partitioned.get((e.src, e.src_slot), False):
                    _insert_on_edge(pdag, e, "Merge", partitioned, False)
            for s in range(node.outputs):
                partitioned[(nid, s)] = False


def _insert_on_edge(pdag: PhysicalDAG, edge: LEdge, kind: str,
                    partitioned, result_partitioned: bool):
    args = ()
    if kind == "Merge":
        src = pdag.nodes[edge.src]
        if not src.virtual and src.kind in PHYS_REGISTRY:
            args = make_args(mode=src.spec().merge)
        else:
            args = make_args(mode="concat")
    mid = pdag.add(kind, args, [(edge.src, edge.src_slot)])
    pdag.edges = [e for e in pdag.edges if e is not edge]
    pdag.edges.append(replace(edge, src=mid, src_slot=0))
    partitioned[(mid, 0)] = result_partitioned


# --- buffering: chain partitioning -----------------------------------------------------

@dataclass
class Chain:
    nodes: list[int]


def partition_chains(pdag: PhysicalDAG) -> tuple[list[Chain], set[tuple[int, int]]]:
    """Cut edges per the three buffering rules and return the remaining paths.

    Returns (chains, cut_edges) where cut edges are (src, dst) pairs.
    Partition/Merge boundaries are always cut: partitioned collections are
    materialized per partition.
    """
    cut: set[tuple[int, int]] = set()
    dataflow = [e for e in pdag.edges if e.kind == "dataflow"]
    out_degree: dict[int, int] = {}
    for e in pdag.edges:
        out_degree[e.src] = out_degree.get(e.src, 0) + 1

    for e in dataflow:
        src, dst = pdag.nodes[e.src], pdag.nodes[e.dst]
        s_spec, d_spec = src.spec(), dst.spec()
        # rule 1: producer cannot stream output, or consumer cannot stream input
        if s_spec.buf in ("SI", "B") or d_spec.buf in ("SO", "B"):
            cut.add((e.src, e.dst))
        # rule 2: data does not arrive on the consumer's streaming capOn slot
        n_inputs = len(pdag.inputs(e.dst))
        if d_spec.buf in ("SI", "SS") and n_inputs > 1:
            capon = d_spec.buf_capon if d_spec.buf_capon is not None else 0
            if e.dst_slot != capon:
                cut.add((e.src, e.dst))
        if src.kind in ("Partition", "Merge") or dst.kind in ("Partition", "Merge"):
            cut.add((e.src, e.dst))
        if src.virtual or dst.virtual:
            cut.add((e.src, e.dst))
    # rule 3: every out-edge of a fan-out node is cut
    for e in pdag.edges:
        if out_degree.get(e.src, 0) > 1:
            cut.add((e.src, e.dst))
    # sub-operator edges never stream
    for e in pdag.edges:
        if e.kind == "sub":
            cut.add((e.src, e.dst))

    kept: dict[int, list[int]] = {}
    kept_in: dict[int, int] = {}
    for e in dataflow:
        if (e.src, e.dst) not in cut:
            kept.setdefault(e.src, []).append(e.dst)
            kept_in[e.dst] = kept_in.get(e.dst, 0) + 1
    for nid, nexts in kept.items():
        if len(set(nexts)) > 1:
            raise PlanError("buffering rules left a fan-out uncut")

    chains = []
    seen: set[int] = set()
    for nid in pdag.topo_order():
        if nid in seen or kept_in.get(nid, 0) > 0:
            continue
        chain = [nid]
        seen.add(nid)
        cur = nid
        while cur in kept and kept[cur]:
            cur = kept[cur][0]
            chain.append(cur)
            seen.add(cur)
        chains.append(Chain(chain))
    return chains, cut


# --- pipeline vs data parallelism analysis ----------------------------------------------

def pipeline_dp_times(t1: float, t2: float, n: int, m: int, agg: float,
                      n1: int) -> tuple[float, float]:
    """Execution-time estimates for pure data parallelism (T1) and the
    pipeline+DP hybrid (T2) on a two-operator chain."""
    if n < 2:
        raise DomainError(f"core count must be >= 2, got {n}")
    if not (1 <= n1 < n):
        raise DomainError(f"n1 must satisfy 1 <= n1 < n, got {n1}")
    if t1 < 0 or t2 < 0 or m < 0 or agg < 0:
        raise DomainError("t1, t2, m, agg must be non-negative")
    time_dp = (t1 + t2) * m / n + agg * n
    time_hybrid = max(t1 * m / n1, t2 * m / (n - n1)) + agg * n1
    return time_dp, time_hybrid


def optimal_core_split(t1: float, t2: float, n: int) -> float:
    """Cores assigned to the producer under rate matching: t1*n/(t1+t2)."""
    if t1 + t2 == 0:
        return n / 2
    return t1 * n / (t1 + t2)


# --- finalize: virtual-node resolution ---------------------------------------------------

def choose_subplan(subs: list[SubPlan], costs: list[float]) -> int:
    """Minimum predicted cost; ties break toward the lowest index (the
    registry lists embedded/local alternatives first)."""
    best = 0
    for i in range(1, len(subs)):
        if costs[i] < costs[best]:
            best = i
    return best


def resolve_virtual(pg: PhysicalDAG, vid: int, sub: SubPlan) -> dict[int, int]:
    """Replace a virtual node in pg by one of its sub-plans (in place)."""
    node = pg.nodes[vid]
    ext = pg.inputs(vid)
    mapping: dict[int, int] = {}
    for snid in sub.dag.topo_order():
        snode = sub.dag.nodes[snid]
        if snode.kind == "ExternalInput":
            continue
        inputs = []
        for e in sub.dag.inputs(snid):
            src = sub.dag.nodes[e.src]
            if src.kind == "ExternalInput":
                idx = args_dict(src)["index"]
                inputs.append((ext[idx].src, ext[idx].src_slot))
            else:
                inputs.append((mapping[e.src], e.src_slot))
        mapping[snid] = pg.add(snode.kind, snode.args, inputs,
                               outputs=snode.outputs)
    for out_idx, (snid, s_slot) in enumerate(sub.out_slots):
        new = mapping[snid]
        for i, e in enumerate(pg.edges):
            if e.src == vid and e.src_slot == out_idx:
                pg.edges[i] = replace(e, src=new, src_slot=s_slot)
        for var, (onid, oslot) in list(pg.outputs.items()):
            if onid == vid and oslot == out_idx:
                pg.outputs[var] = (new, s_slot)
    pg.remove_node(vid)
    return mapping


def finalize_plan(plans: CandidatePlans, predict) -> PhysicalDAG:
    """Replace every virtual node using `predict(vid, subplan) -> cost` and
    return the concrete physical DAG."""
    pg = plans.pg.copy()
    for vid, subs in plans.pm.items():
        costs = [predict(vid, sub) for sub in subs]
        resolve_virtual(pg, vid, subs[choose_subplan(subs, costs)])
    return pg


# --- DOT rendering --------------------------------------------------------------------

def to_dot(plans: CandidatePlans, cuts: set | None = None,
           title: str = "physical") -> str:
    pg = plans.pg
    lines = [f"digraph {title} {{", "  rankdir=BT;"]
    for nid, node in sorted(pg.nodes.items()):
        if node.virtual:
            alts = "|".join(s.label for s in plans.pm.get(nid, []))
            lines.append(f'  n{nid} [shape=record, label="virtual {nid}|{alts}"];')
        else:
            spec = node.spec()
            lines.append(
                f'  n{nid} [label="{node.kind}\\n{spec.dp}/{spec.buf}"];')
    for e in pg.edges:
        style = "solid" if e.kind == "dataflow" else "dashed"
        attrs = [f"style={style}"]
        if cuts is not None and (e.src, e.dst) in cuts:
            attrs.append('color=red, label="cut"')
        lines.append(f"  n{e.src} -> n{e.dst} [{', '.join(attrs)}];")
    lines.append("}")
    return "\n".join(lines)
