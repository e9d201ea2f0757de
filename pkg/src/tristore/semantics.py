"""Compile-time validation and type/metadata inference.

Each statement's right-hand side is validated against the system catalog
(queries), the function catalog (calls), and the variable metadata map
(variable uses); left-hand-side metadata is then inferred and bound.
Errors carry the statement index and source span for diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import semtypes as st
from .ast_nodes import (Assignment, BinCmp, Expr, FuncCall, Index, ListLit,
                        Literal, Logic, MapExpr, Member, Param, Query,
                        ReduceExpr, Script, Store, TupleLit, UnderscoreRef,
                        VarRef, WhereExpr)
from .catalog import REQUIRED, FunctionSignature, SystemCatalog, ANY
from .errors import (ArityMismatch, MissingSchemaAnnotation, NotACollection,
                     PredicateNotBoolean, SemanticError, TriStoreError,
                     TypeMismatch, UnknownEngineAlias, UnknownRelationOrColumn,
                     UnknownVariable, UnsupportedSyntax)
from .querylang import (CyBool, CyContains, CyDynamic, CyEq, CyIn, CypherQuery,
                        SolrQuery, SqlBool, SqlCmp, SqlParam, SqlSelect,
                        parse_cypher, parse_solr, parse_sql)
from .semtypes import (CollectionMeta, GraphMeta, MatrixMeta, VarMeta)

PRIM_BY_NAME = {"Integer": st.INTEGER, "Double": st.DOUBLE,
                "String": st.STRING, "Boolean": st.BOOLEAN}


@dataclass
class TypedStatement:
    statement: object
    env_before: dict[str, VarMeta]
    lhs_metas: list[tuple[str, VarMeta]] = field(default_factory=list)


@dataclass
class TypedScript:
    script: Script
    catalog: SystemCatalog
    statements: list[TypedStatement]
    env_after: dict[str, VarMeta]


def validate_and_infer(script: Script, cat: SystemCatalog) -> TypedScript:
    return _Checker(script, cat).run()


class _Checker:
    def __init__(self, script: Script, cat: SystemCatalog):
        self.script = script
        self.cat = cat
        self.env: dict[str, VarMeta] = {}
        self.stmt_index = 0

    def run(self) -> TypedScript:
        typed: list[TypedStatement] = []
        for i, stmt in enumerate(self.script.statements):
            self.stmt_index = i
            snapshot = dict(self.env)
            try:
                if isinstance(stmt, Store):
                    self.check_store(stmt)
                    typed.append(TypedStatement(stmt, snapshot))
                else:
                    lhs_metas = self.check_assignment(stmt)
                    typed.append(TypedStatement(stmt, snapshot, lhs_metas))
            except SemanticError as err:
                if err.statement_index < 0:
                    err.statement_index = i
                if err.span is None:
                    err.span = stmt.span
                raise
            except TriStoreError as err:
                wrapped = SemanticError(str(err), i, stmt.span)
                wrapped.code = type(err).__name__
                raise wrapped from err
        return TypedScript(self.script, self.cat, typed, dict(self.env))

    # --- statements ---

    def check_assignment(self, stmt: Assignment) -> list[tuple[str, VarMeta]]:
        metas = self.infer_multi(stmt.rhs)
        if len(metas) != len(stmt.lhs):
            raise ArityMismatch(
                f"expression produces {len(metas)} values but "
                f"{len(stmt.lhs)} variables are assigned")
        out = []
        for var, meta in zip(stmt.lhs, metas):
            if var.annotation and not isinstance(stmt.rhs, Query):
                raise SemanticError(
                    "schema annotations are only allowed on query results")
            self.env[var.name] = meta
            out.append((var.name, meta))
        return out

    def check_store(self, stmt: Store):
        if stmt.var not in self.env:
            raise UnknownVariable(f"store of unbound variable {stmt.var!r}")
        meta = self.env[stmt.var]
        if stmt.db_name != "fs":
            desc = self.cat.lookup_engine(stmt.db_name)
            if desc.model != "relational":
                raise UnsupportedSyntax("store targets a relational engine or fs")
        if meta.type.kind not in ("Relation", "List"):
            raise TypeMismatch("Relation or List", str(meta.type))
        if stmt.columns:
            alias = stmt.var_alias or stmt.var
            for col in stmt.columns:
                if col.source_var != alias:
                    raise UnknownVariable(
                        f"column mapping references {col.source_var!r}, "
                        f"expected alias {alias!r}")
                if meta.type.kind == "List":
                    if col.member not in ("index", "value"):
                        raise UnknownRelationOrColumn(
                            f"list store supports index/value, got {col.member!r}")
                else:
                    if col.member not in (meta.relation_schema or {}):
                        raise UnknownRelationOrColumn(
                            f"column {col.member!r} not in stored relation")

    # --- expressions ---

    def infer_multi(self, expr: Expr) -> list[VarMeta]:
        if isinstance(expr, FuncCall):
            sig = self.resolve_call(expr)
            if not sig.reserved and len(sig.returns) > 1:
                metas = self.function_result(sig, expr)
                expr.inferred = metas[0]
                return metas
        return [self.infer(expr)]

    def infer(self, expr: Expr) -> VarMeta:
        meta = self._infer(expr)
        expr.inferred = meta
        return meta

    def _infer(self, expr: Expr) -> VarMeta:
        if isinstance(expr, Literal):
            meta = VarMeta(PRIM_BY_NAME[expr.prim_type])
            if expr.prim_type == "Integer":
                meta.static_value = expr.value
            return meta
        if isinstance(expr, ListLit):
            return self.infer_list_lit(expr)
        if isinstance(expr, TupleLit):
            metas = [self.infer(e) for e in expr.items]
            return VarMeta(st.tuple_of(*(m.type for m in metas)))
        if isinstance(expr, VarRef):
            if expr.name not in self.env:
                raise UnknownVariable(f"unknown variable {expr.name!r}",
                                      self.stmt_index, expr.span)
            return self.env[expr.name]
        if isinstance(expr, UnderscoreRef):
            key = "_:" + (expr.mode or "elem")
            if key not in self.env:
                raise SemanticError("`_` is only valid inside a where predicate",
                                    self.stmt_index, expr.span)
            return self.env[key]
        if isinstance(expr, Index):
            base = self.infer(expr.base)
            idx = self.infer(expr.index)
            if base.type.kind != "List":
                raise NotACollection(f"cannot index into {base.type}")
            if idx.type != st.INTEGER:
                raise TypeMismatch("Integer", str(idx.type))
            return base.element()
        if isinstance(expr, Member):
            return self.infer_member(expr)
        if isinstance(expr, Query):
            return self.infer_query(expr)
        if isinstance(expr, FuncCall):
            sig = self.resolve_call(expr)
            metas = self.function_result(sig, expr)
            if len(metas) != 1:
                raise ArityMismatch(
                    f"{expr.name} returns {len(metas)} values; "
                    "multi-valued calls must be assigned directly")
            return metas[0]
        if isinstance(expr, MapExpr):
            return self.infer_map(expr)
        if isinstance(expr, ReduceExpr):
            return self.infer_reduce(expr)
        if isinstance(expr, WhereExpr):
            return self.infer_where(expr)
        if isinstance(expr, BinCmp):
            left = self.infer(expr.left)
            right = self.infer(expr.right)
            if not _comparable(left.type, right.type):
                raise TypeMismatch(str(left.type), str(right.type),
                                   self.stmt_index, expr.span)
            return VarMeta(st.BOOLEAN)
        if isinstance(expr, Logic):
            for op in expr.operands:
                if self.infer(op).type != st.BOOLEAN:
                    raise PredicateNotBoolean("logic operands must be Boolean",
                                              self.stmt_index, expr.span)
            return VarMeta(st.BOOLEAN)
        raise SemanticError(f"cannot type expression {type(expr).__name__}",
                            self.stmt_index, expr.span)

    def infer_list_lit(self, expr: ListLit) -> VarMeta:
        if not expr.items:
            return VarMeta(st.list_of(st.STRING),
                           collection_meta=CollectionMeta(size=0))
        metas = [self.infer(e) for e in expr.items]
        elem = metas[0].type
        for m in metas[1:]:
            if m.type == elem:
                continue
            if {m.type, elem} == {st.INTEGER, st.DOUBLE}:
                elem = st.DOUBLE
                continue
            raise TypeMismatch(str(elem), str(m.type), self.stmt_index, expr.span)
        return VarMeta(st.list_of(elem),
                       collection_meta=CollectionMeta(element_meta=metas[0],
                                                      size=len(metas)))

    def infer_member(self, expr: Member) -> VarMeta:
        base = self.infer(expr.base)
        if base.type.kind == "Relation":
            schema = base.relation_schema or {}
            if expr.member not in schema:
                raise UnknownRelationOrColumn(
                    f"column {expr.member!r} not in relation", self.stmt_index,
                    expr.span)
            elem = PRIM_BY_NAME[schema[expr.member]]
            return VarMeta(st.list_of(elem))
        if base.type.kind == "Corpus":
            fields = base.fields or {}
            if expr.member not in fields:
                raise UnknownRelationOrColumn(
                    f"field {expr.member!r} not in corpus", self.stmt_index,
                    expr.span)
            return VarMeta(st.list_of(st.STRING))
        raise TypeMismatch("Relation or Corpus", str(base.type),
                           self.stmt_index, expr.span)

    # --- queries ---

    def infer_query(self, expr: Query) -> VarMeta:
        if expr.dialect == "sql":
            return self.infer_sql_query(expr)
        if expr.dialect == "cypher":
            return self.infer_cypher_query(expr)
        return self.infer_solr_query(expr)

    def _target_descriptor(self, expr: Query, model: str):
        if expr.engine_alias is not None:
            try:
                desc = self.cat.lookup_engine(expr.engine_alias)
            except TriStoreError as err:
                raise UnknownEngineAlias(str(err), self.stmt_index, expr.span)
            if desc.model != model:
                raise TypeMismatch(f"{model} engine", desc.model,
                                   self.stmt_index, expr.span)
            return desc
        return None

    def param_meta(self, p: Param, span=None) -> VarMeta:
        if p.var not in self.env:
            raise UnknownVariable(f"unknown query parameter ${p.var}",
                                  self.stmt_index, span)
        meta = self.env[p.var]
        if p.member is None:
            return meta
        if meta.type.kind == "Relation":
            schema = meta.relation_schema or {}
            if p.member not in schema:
                raise UnknownRelationOrColumn(
                    f"column {p.member!r} not in ${p.var}", self.stmt_index, span)
            return VarMeta(st.list_of(PRIM_BY_NAME[schema[p.member]]))
        raise TypeMismatch("Relation", str(meta.type), self.stmt_index, span)

    def infer_sql_query(self, expr: Query) -> VarMeta:
        desc = self._target_descriptor(expr, "relational")
        if expr.engine_var is not None:
            raise UnsupportedSyntax(
                "SQL queries target an engine alias; pass relation variables "
                "as $parameters")
        try:
            sel = parse_sql(expr.template)
        except TriStoreError as err:
            raise SemanticError(f"bad SQL query: {err}", self.stmt_index, expr.span)
        expr.parsed = sel

        def table_schema(ref):
            if ref.param is not None:
                meta = self.param_meta(ref.param, expr.span)
                if meta.type.kind != "Relation":
                    raise TypeMismatch("Relation", str(meta.type),
                                       self.stmt_index, expr.span)
                return meta.relation_schema or {}
            entry = desc.entry(ref.name) if desc else None
            if entry is None or entry.kind != "table":
                raise UnknownRelationOrColumn(
                    f"relation {ref.name!r} not in engine "
                    f"{desc.alias if desc else '?'}", self.stmt_index, expr.span)
            return entry.columns

        from .querylang import infer_sql_schema
        schema = infer_sql_schema(sel, table_schema)
        self._check_sql_params(sel, expr)
        if expr.annotation and dict(expr.annotation) != dict(schema):
            raise TypeMismatch(str(dict(schema)), str(dict(expr.annotation)),
                               self.stmt_index, expr.span)
        return VarMeta(st.RELATION, relation_schema=schema,
                       origin_engine=expr.engine_alias)

    def _check_sql_params(self, sel: SqlSelect, expr: Query):
        def scan_pred(p):
            if isinstance(p, SqlBool):
                for q in p.operands:
                    scan_pred(q)
            elif isinstance(p, SqlCmp):
                if p.op == "in" and isinstance(p.right, SqlParam):
                    meta = self.param_meta(p.right.param, expr.span)
                    if meta.type.kind != "List":
                        raise TypeMismatch("List", str(meta.type),
                                           self.stmt_index, expr.span)
                elif isinstance(p.right, SqlParam):
                    meta = self.param_meta(p.right.param, expr.span)
                    if not meta.type.is_primitive:
                        raise TypeMismatch("primitive", str(meta.type),
                                           self.stmt_index, expr.span)
                if isinstance(p.left, SqlParam):
                    meta = self.param_meta(p.left.param, expr.span)
                    if not meta.type.is_primitive:
                        raise TypeMismatch("primitive", str(meta.type),
                                           self.stmt_index, expr.span)
        if sel.where is not None:
            scan_pred(sel.where)

    def infer_cypher_query(self, expr: Query) -> VarMeta:
        if expr.annotation is None:
            raise MissingSchemaAnnotation(
                "Cypher results require a <col:Type, ...> schema annotation",
                self.stmt_index, expr.span)
        gmeta = None
        if expr.engine_var is not None:
            if expr.engine_var not in self.env:
                raise UnknownVariable(f"unknown variable {expr.engine_var!r}",
                                      self.stmt_index, expr.span)
            var_meta = self.env[expr.engine_var]
            if var_meta.type.kind != "PropertyGraph":
                raise TypeMismatch("PropertyGraph", str(var_meta.type),
                                   self.stmt_index, expr.span)
            gmeta = var_meta.graph_meta
        else:
            desc = self._target_descriptor(expr, "graph")
            gmeta = GraphMeta(
                node_labels={e.name for e in desc.entries("label")},
                node_props={c: t for e in desc.entries("label")
                            for c, t in e.columns.items()},
                edge_labels={e.name for e in desc.entries("edgelabel")},
                edge_props={c: t for e in desc.entries("edgelabel")
                            for c, t in e.columns.items()})
        try:
            cq = parse_cypher(expr.template)
        except TriStoreError as err:
            raise SemanticError(f"bad Cypher query: {err}", self.stmt_index,
                                expr.span)
        expr.parsed = cq
        self._check_cypher(cq, gmeta, expr)
        aliases = [alias for _prop, alias in cq.returns]
        if list(expr.annotation) != aliases:
            raise TypeMismatch(f"annotation columns {list(expr.annotation)}",
                               f"RETURN aliases {aliases}",
                               self.stmt_index, expr.span)
        schema = dict(expr.annotation)
        return VarMeta(st.RELATION, relation_schema=schema,
                       origin_engine=expr.engine_alias)

    def _check_cypher(self, cq: CypherQuery, gmeta: GraphMeta | None, expr: Query):
        if gmeta is not None:
            for pat in (cq.node, cq.other):
                if pat is not None and pat.label is not None \
                        and gmeta.node_labels and pat.label not in gmeta.node_labels:
                    raise UnknownRelationOrColumn(
                        f"unknown node label {pat.label!r}", self.stmt_index,
                        expr.span)
            if cq.edge_label is not None and gmeta.edge_labels \
                    and cq.edge_label not in gmeta.edge_labels:
                raise UnknownRelationOrColumn(
                    f"unknown edge label {cq.edge_label!r}", self.stmt_index,
                    expr.span)

        node_vars = {p.var for p in (cq.node, cq.other) if p is not None and p.var}

        def check_prop(prop):
            if gmeta is None:
                return
            pool = dict(gmeta.node_props)
            pool.update(gmeta.edge_props)
            if prop.var in node_vars:
                pool = gmeta.node_props
            elif gmeta.edge_props:
                pool = gmeta.edge_props
            if pool and prop.prop not in pool:
                raise UnknownRelationOrColumn(
                    f"unknown property {prop.prop!r}", self.stmt_index, expr.span)

        def scan(pred):
            if isinstance(pred, CyBool):
                for p in pred.operands:
                    scan(p)
            elif isinstance(pred, CyIn):
                check_prop(pred.left)
                if isinstance(pred.right, Param):
                    meta = self.param_meta(pred.right, expr.span)
                    if meta.type.kind != "List":
                        raise TypeMismatch("List", str(meta.type),
                                           self.stmt_index, expr.span)
            elif isinstance(pred, CyContains):
                check_prop(pred.left)
                if isinstance(pred.needle, Param):
                    meta = self.param_meta(pred.needle, expr.span)
                    if meta.type != st.STRING:
                        raise TypeMismatch("String", str(meta.type),
                                           self.stmt_index, expr.span)
            elif isinstance(pred, CyEq):
                check_prop(pred.left)
                if isinstance(pred.right, Param):
                    meta = self.param_meta(pred.right, expr.span)
                    if not meta.type.is_primitive:
                        raise TypeMismatch("primitive", str(meta.type),
                                           self.stmt_index, expr.span)
            elif isinstance(pred, CyDynamic):
                meta = self.param_meta(pred.param, expr.span)
                if meta.type != st.STRING:
                    raise TypeMismatch("String", str(meta.type),
                                       self.stmt_index, expr.span)
        if cq.where is not None:
            scan(cq.where)
        for prop, _alias in cq.returns:
            check_prop(prop)

    def infer_solr_query(self, expr: Query) -> VarMeta:
        desc = self._target_descriptor(expr, "text")
        if desc is None:
            raise UnsupportedSyntax("text queries target an engine alias")
        try:
            sq = parse_solr(expr.template)
        except TriStoreError as err:
            raise SemanticError(f"bad text query: {err}", self.stmt_index, expr.span)
        expr.parsed = sq
        declared = {c: t for e in desc.entries("field") for c, t in e.columns.items()}
        if sq.groups is not None:
            for grp in sq.groups:
                for clause in grp:
                    if clause.field not in declared:
                        raise UnknownRelationOrColumn(
                            f"unknown text field {clause.field!r}",
                            self.stmt_index, expr.span)
        if sq.dynamic is not None:
            meta = self.param_meta(sq.dynamic, expr.span)
            if meta.type != st.STRING:
                raise TypeMismatch("String", str(meta.type), self.stmt_index,
                                   expr.span)
        fields = dict(expr.annotation) if expr.annotation else dict(declared)
        for f in fields:
            if f not in declared:
                raise UnknownRelationOrColumn(
                    f"annotated field {f!r} not on engine", self.stmt_index,
                    expr.span)
        meta = VarMeta(st.CORPUS, origin_engine=expr.engine_alias)
        meta.fields = fields
        return meta

    # --- functions and higher-order forms ---

    def resolve_call(self, expr: FuncCall) -> FunctionSignature:
        arg_metas = [self.infer(a) for a in expr.args]
        if expr.graph_template is not None:
            arg_metas.append(VarMeta(st.SemanticType("GraphTemplate")))
        sig = self.cat.lookup_function(expr.name, [m.type for m in arg_metas])
        if sig.reserved:
            raise SemanticError(
                f"{expr.name} is a reserved keyword used incorrectly",
                self.stmt_index, expr.span)
        for name, arg in expr.named.items():
            if name not in sig.named_params:
                raise ArityMismatch(f"{expr.name} has no named parameter {name!r}",
                                    self.stmt_index, expr.span)
            want, _default = sig.named_params[name]
            got = self.infer(arg)
            if want != ANY and not st.assignable(want, got.type) \
                    and not (want.kind == "List" and got.type.kind == "List"):
                raise TypeMismatch(str(want), str(got.type), self.stmt_index,
                                   expr.span)
        for name, (want, default) in sig.named_params.items():
            if default is REQUIRED and name not in expr.named:
                raise ArityMismatch(
                    f"{expr.name} requires named parameter {name!r}",
                    self.stmt_index, expr.span)
        expr.resolved = sig
        return sig

    def function_result(self, sig: FunctionSignature, expr: FuncCall) -> list[VarMeta]:
        arg_metas = [a.inferred for a in expr.args]
        name = sig.name
        if name == "lda":
            k = _static_int(expr.named.get("topic"), self.env)
            dtm = VarMeta(st.MATRIX, matrix_meta=MatrixMeta(
                col_count=k, has_row_map=True, has_col_map=True))
            dtm.row_key_type = st.INTEGER
            wtm = VarMeta(st.MATRIX, matrix_meta=MatrixMeta(
                col_count=k, has_row_map=True, has_col_map=True))
            wtm.row_key_type = st.STRING
            return [dtm, wtm]
        if name in ("pageRank", "betweenness"):
            return [VarMeta(st.RELATION,
                            relation_schema={"node_key": "String", "score": "Double"})]
        if name == "NER":
            return [VarMeta(st.RELATION,
                            relation_schema={"type": "String", "name": "String"})]
        if name in ("tokenize", "preprocess"):
            return [VarMeta(st.CORPUS)]
        if name == "keyphraseMining":
            return [VarMeta(st.list_of(st.STRING))]
        if name == "buildWordNeighborGraph":
            return [VarMeta(st.GRAPH, graph_meta=GraphMeta(
                node_labels={"Word"}, node_props={"value": "String"},
                edge_labels={"Cooccur"}, edge_props={"count": "Integer"},
                key_prop="value"))]
        if name == "collectWordNeighbors":
            return [VarMeta(st.RELATION, relation_schema={
                "word1": "String", "word2": "String", "count": "Integer"})]
        if name == "ConstructGraphFromRelation":
            return [self._graph_template_meta(expr)]
        if name == "range":
            size = None
            vals = [_static_int(a, self.env) for a in expr.args]
            if all(v is not None for v in vals) and vals[2]:
                size = len(range(vals[0], vals[1], vals[2]))
            return [VarMeta(st.list_of(st.INTEGER),
                            collection_meta=CollectionMeta(size=size))]
        if name == "union":
            elem = arg_metas[0].type.elem.elem if arg_metas[0].type.elem else st.STRING
            return [VarMeta(st.list_of(elem))]
        if name == "sum":
            if arg_metas[0].type.kind == "List":
                elem = arg_metas[0].type.elem
                if elem not in (st.INTEGER, st.DOUBLE):
                    raise TypeMismatch("List of numbers", str(arg_metas[0].type),
                                       self.stmt_index, expr.span)
                return [VarMeta(elem)]
            return [VarMeta(st.DOUBLE)]
        if name == "toList":
            return [arg_metas[0]]
        if name in ("rowNames", "colNames"):
            m = arg_metas[0]
            key_type = getattr(m, "row_key_type" if name == "rowNames"
                               else "col_key_type", None) or st.STRING
            return [VarMeta(st.list_of(key_type))]
        if name in ("getRows", "getCols"):
            src = arg_metas[0]
            out = VarMeta(st.MATRIX, matrix_meta=MatrixMeta(
                has_row_map=src.matrix_meta.has_row_map if src.matrix_meta else False,
                has_col_map=src.matrix_meta.has_col_map if src.matrix_meta else False))
            out.row_key_type = getattr(src, "row_key_type", None)
            return [out]
        # default: types straight from the signature
        out = []
        for ret in sig.returns:
            if ret.kind == "Matrix":
                out.append(VarMeta(st.MATRIX, matrix_meta=MatrixMeta()))
            else:
                out.append(VarMeta(ret))
        return out

    def _graph_template_meta(self, expr: FuncCall) -> VarMeta:
        rel_meta = expr.args[0].inferred
        if rel_meta.type.kind != "Relation":
            raise TypeMismatch("Relation", str(rel_meta.type), self.stmt_index,
                               expr.span)
        schema = rel_meta.relation_schema or {}
        t = expr.graph_template
        node_props: dict[str, str] = {}
        edge_props: dict[str, str] = {}
        for props, sink in ((t.src_props, node_props), (t.edge_props, edge_props),
                            (t.dst_props, node_props)):
            for key, colref in props.items():
                if colref.column not in schema:
                    raise UnknownRelationOrColumn(
                        f"template column {colref.column!r} not in relation",
                        self.stmt_index, expr.span)
                sink[key] = schema[colref.column]
        key_prop = next(iter(t.src_props), None)
        return VarMeta(st.GRAPH, graph_meta=GraphMeta(
            node_labels={t.src_label, t.dst_label},
            node_props=node_props,
            edge_labels={t.edge_label},
            edge_props=edge_props,
            key_prop=key_prop))

    def infer_map(self, expr: MapExpr) -> VarMeta:
        src = self.infer(expr.source)
        if src.type.kind not in ("List", "Relation", "Corpus"):
            raise NotACollection(f"map source must be a collection, got {src.type}",
                                 self.stmt_index, expr.span)
        elem = src.element()
        saved = self.env.get(expr.var)
        self.env[expr.var] = elem
        try:
            body = self.infer(expr.body)
        finally:
            if saved is None:
                self.env.pop(expr.var, None)
            else:
                self.env[expr.var] = saved
        size = src.collection_meta.size if src.collection_meta else None
        return VarMeta(st.list_of(body.type),
                       collection_meta=CollectionMeta(element_meta=body, size=size))

    def infer_reduce(self, expr: ReduceExpr) -> VarMeta:
        src = self.infer(expr.source)
        if src.type.kind != "List":
            raise NotACollection(f"reduce source must be a List, got {src.type}",
                                 self.stmt_index, expr.span)
        elem = src.element()
        saved = {v: self.env.get(v) for v in (expr.var1, expr.var2)}
        self.env[expr.var1] = elem
        self.env[expr.var2] = elem
        try:
            body = self.infer(expr.body)
        finally:
            for v, old in saved.items():
                if old is None:
                    self.env.pop(v, None)
                else:
                    self.env[v] = old
        if not st.assignable(elem.type, body.type):
            raise TypeMismatch(str(elem.type), str(body.type), self.stmt_index,
                               expr.span)
        return body

    def infer_where(self, expr: WhereExpr) -> VarMeta:
        src = self.infer(expr.source)
        if src.type.kind == "Matrix":
            if expr.iteration_mode not in ("Row", "Col"):
                raise SemanticError(
                    "matrix filters must specify `_:Row` or `_:Col`",
                    self.stmt_index, expr.span)
            binding = VarMeta(st.list_of(st.DOUBLE))
            key = "_:" + expr.iteration_mode
        elif src.type.kind == "List":
            binding = src.element()
            key = "_:elem"
        else:
            raise NotACollection(
                f"where source must be a Matrix or List, got {src.type}",
                self.stmt_index, expr.span)
        saved = self.env.get(key)
        self.env[key] = binding
        try:
            pred = self.infer(expr.predicate)
        finally:
            if saved is None:
                self.env.pop(key, None)
            else:
                self.env[key] = saved
        if pred.type != st.BOOLEAN:
            raise PredicateNotBoolean("where predicate must be Boolean",
                                      self.stmt_index, expr.span)
        return src


def _comparable(a: st.SemanticType, b: st.SemanticType) -> bool:
    nums = (st.INTEGER, st.DOUBLE)
    if a in nums and b in nums:
        return True
    return a == b and a.is_primitive


def _static_int(expr, env) -> int | None:
    """Best-effort static value for literals and already-bound constant vars."""
    if expr is None:
        return None
    if isinstance(expr, Literal) and expr.prim_type == "Integer":
        return expr.value
    if isinstance(expr, VarRef):
        meta = env.get(expr.name)
        if meta is not None and meta.static_value is not None:
            return meta.static_value
    return None
