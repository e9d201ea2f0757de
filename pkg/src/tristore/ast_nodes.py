"""AST for the dataflow language, plus the pretty printer used by round-trip tests."""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Any, Optional

from .errors import Span


@dataclass
class Node:
    span: Optional[Span] = field(default=None, kw_only=True, compare=False, repr=False)


# --- expressions -------------------------------------------------------------

@dataclass
class Expr(Node):
    # filled in by semantic analysis
    inferred: Any = field(default=None, kw_only=True, compare=False, repr=False)


@dataclass
class Literal(Expr):
    value: object
    prim_type: str  # Integer | Double | String | Boolean


@dataclass
class ListLit(Expr):
    items: list[Expr]


@dataclass
class TupleLit(Expr):
    items: list[Expr]


@dataclass
class VarRef(Expr):
    name: str


@dataclass
class Index(Expr):
    base: Expr
    index: Expr


@dataclass
class Member(Expr):
    base: Expr
    member: str


@dataclass
class UnderscoreRef(Expr):
    """`_` with an optional iteration mode, e.g. `_:Row` inside a matrix filter."""
    mode: Optional[str] = None  # Row | Col | None


@dataclass
class Param:
    """A `$var[.member]` reference inside a query template."""
    var: str
    member: Optional[str] = None


@dataclass
class QueryTemplate:
    raw: str
    # alternating str literals and Param references, in textual order
    segments: list[object] = field(default_factory=list)

    def params(self) -> list[tuple[str, Optional[str]]]:
        return [(s.var, s.member) for s in self.segments if isinstance(s, Param)]

    def reconstruct(self) -> str:
        out = []
        for seg in self.segments:
            if isinstance(seg, Param):
                out.append(f"${seg.var}" + (f".{seg.member}" if seg.member else ""))
            else:
                out.append(seg)
        return "".join(out)


def parse_template(raw: str) -> QueryTemplate:
    """Split a query string into literal text and `$var[.member]` references."""
    import re
    segments: list[object] = []
    pos = 0
    for m in re.finditer(r"\$([A-Za-z_][A-Za-z0-9_]*)(?:\.([A-Za-z_][A-Za-z0-9_\-]*))?", raw):
        if m.start() > pos:
            segments.append(raw[pos:m.start()])
        segments.append(Param(m.group(1), m.group(2)))
        pos = m.end()
    if pos < len(raw):
        segments.append(raw[pos:])
    tpl = QueryTemplate(raw, segments)
    assert tpl.reconstruct() == raw
    return tpl


@dataclass
class Query(Expr):
    dialect: str                      # sql | cypher | solr
    engine_alias: Optional[str]       # None when querying a variable
    engine_var: Optional[str]         # variable holding the target value
    template: QueryTemplate = None
    annotation: Optional[dict[str, str]] = None  # <col:Type, ...> result schema


@dataclass
class ColRef:
    """Column reference inside a graph construction template: [$]var.column."""
    var: str
    column: str


@dataclass
class GraphTemplate:
    src_label: str
    src_props: dict[str, ColRef]
    edge_label: str
    edge_props: dict[str, ColRef]
    dst_label: str
    dst_props: dict[str, ColRef]
    directed: bool = True


@dataclass
class FuncCall(Expr):
    name: str
    args: list[Expr]
    named: dict[str, Expr] = field(default_factory=dict)
    graph_template: Optional[GraphTemplate] = None


@dataclass
class MapExpr(Expr):
    source: Expr
    var: str
    body: Expr


@dataclass
class ReduceExpr(Expr):
    source: Expr
    var1: str
    var2: str
    body: Expr


@dataclass
class WhereExpr(Expr):
    source: Expr
    predicate: Expr
    iteration_mode: Optional[str] = None  # Row | Col for matrix sources


@dataclass
class BinCmp(Expr):
    op: str  # < | == | >
    left: Expr
    right: Expr


@dataclass
class Logic(Expr):
    op: str  # AND | OR | NOT
    operands: list[Expr]


# --- statements --------------------------------------------------------------

@dataclass
class LhsVar:
    name: str
    annotation: Optional[dict[str, str]] = None  # ordered column -> primitive type


@dataclass
class Assignment(Node):
    lhs: list[LhsVar]
    rhs: Expr


@dataclass
class StoreColumn:
    target: str      # output column name
    source_var: str  # the bound alias inside the store statement
    member: str      # member of the stored variable (column, or index/value for lists)


@dataclass
class Store(Node):
    var: str
    var_alias: Optional[str]
    db_name: str
    table_name: Optional[str] = None
    columns: Optional[list[StoreColumn]] = None


Statement = Assignment  # or Store


@dataclass
class Script(Node):
    use_alias: str
    analysis_name: str
    statements: list[Node]


# --- structural equality and printing ----------------------------------------

def ast_equal(a, b) -> bool:
    """Structural equality ignoring spans and inferred metadata."""
    if type(a) is not type(b):
        return False
    if isinstance(a, (list, tuple)):
        return len(a) == len(b) and all(ast_equal(x, y) for x, y in zip(a, b))
    if isinstance(a, dict):
        return list(a.keys()) == list(b.keys()) and all(
            ast_equal(a[k], b[k]) for k in a)
    if hasattr(a, "__dataclass_fields__"):
        for f in fields(a):
            if f.name in ("span", "inferred"):
                continue
            if not ast_equal(getattr(a, f.name), getattr(b, f.name)):
                return False
        return True
    return a == b


def print_script(script: Script) -> str:
    lines = [f"USE {script.use_alias};",
             f"create analysis {script.analysis_name} as ("]
    for stmt in script.statements:
        lines.append(print_statement(stmt) + ";")
    lines.append(");")
    return "\n".join(lines) + "\n"


def print_statement(stmt) -> str:
    if isinstance(stmt, Store):
        parts = [stmt.var + (f" {stmt.var_alias}" if stmt.var_alias else "")]
        parts.append(f'dbName="{stmt.db_name}"')
        if stmt.table_name:
            parts.append(f'tableName="{stmt.table_name}"')
        if stmt.columns:
            cols = ", ".join(f'("{c.target}", {c.source_var}.{c.member})'
                             for c in stmt.columns)
            parts.append(f"columnName=[{cols}]")
        return f"store({', '.join(parts)})"
    lhs = ", ".join(v.name + _print_annotation(v.annotation) for v in stmt.lhs)
    return f"{lhs} := {print_expr(stmt.rhs)}"


def _print_annotation(ann) -> str:
    if not ann:
        return ""
    return "<" + ", ".join(f"{c}:{t}" for c, t in ann.items()) + ">"


def _quote(s: str) -> str:
    if '"' in s or "\n" in s:
        return '"""' + s + '"""'
    return '"' + s + '"'


def print_expr(e: Expr) -> str:
    if isinstance(e, Literal):
        if e.prim_type == "String":
            return _quote(e.value)
        if e.prim_type == "Boolean":
            return "true" if e.value else "false"
        if e.prim_type == "Double":
            return repr(float(e.value))
        return str(e.value)
    if isinstance(e, ListLit):
        return "[" + ", ".join(print_expr(x) for x in e.items) + "]"
    if isinstance(e, TupleLit):
        return "{" + ", ".join(print_expr(x) for x in e.items) + "}"
    if isinstance(e, VarRef):
        return e.name
    if isinstance(e, Index):
        return f"{print_expr(e.base)}[{print_expr(e.index)}]"
    if isinstance(e, Member):
        return f"{print_expr(e.base)}.{e.member}"
    if isinstance(e, UnderscoreRef):
        return "_" + (f":{e.mode}" if e.mode else "")
    if isinstance(e, Query):
        kw = {"sql": "executeSQL", "cypher": "executeCypher", "solr": "executeSOLR"}[e.dialect]
        target = f'"{e.engine_alias}"' if e.engine_alias is not None else e.engine_var
        ann = f"({_print_annotation(e.annotation)}) " if e.annotation else ""
        return f"{ann}{kw}({target}, {_quote(e.template.raw)})"
    if isinstance(e, FuncCall):
        args = [print_expr(a) for a in e.args]
        if e.graph_template is not None:
            args.append(_print_graph_template(e.graph_template))
        args += [f"{k}={print_expr(v)}" for k, v in e.named.items()]
        return f"{e.name}({', '.join(args)})"
    if isinstance(e, MapExpr):
        return f"{print_expr(e.source)}.map({e.var} => {print_expr(e.body)})"
    if isinstance(e, ReduceExpr):
        return (f"{print_expr(e.source)}.reduce(({e.var1}, {e.var2}) => "
                f"{print_expr(e.body)})")
    if isinstance(e, WhereExpr):
        return f"{print_expr(e.source)} where {print_expr(e.predicate)}"
    if isinstance(e, BinCmp):
        return f"{print_expr(e.left)} {e.op} {print_expr(e.right)}"
    if isinstance(e, Logic):
        if e.op == "NOT":
            return f"NOT {print_expr(e.operands[0])}"
        return f" {e.op} ".join(print_expr(x) for x in e.operands)
    raise TypeError(f"unknown expression node {type(e).__name__}")


def _print_graph_template(t: GraphTemplate) -> str:
    def props(d):
        return "{" + ", ".join(f"{k}: {c.var}.{c.column}" for k, c in d.items()) + "}"
    arrow = "->" if t.directed else "-"
    return (f"(:{t.src_label} {props(t.src_props)}) "
            f"-[:{t.edge_label}{props(t.edge_props)}]{arrow}"
            f"(:{t.dst_label}{props(t.dst_props)})")
