"""Bounded SQL / Cypher / Solr query subsets.

One parser per dialect, shared by compile-time validation (schema inference,
catalog checks) and by the embedded engines (execution).  ``$var`` parameter
references arrive pre-segmented from the script parser and become PARAM
tokens; a String-typed parameter standing alone in predicate/clause position
is a *dynamic* predicate whose text is parsed lazily at execution time.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Optional

from .ast_nodes import Param, QueryTemplate
from .errors import (AmbiguousColumn, StarNotSupported, UnknownRelationOrColumn,
                     UnsupportedSyntax)

# --- shared tokenizer --------------------------------------------------------

_Q_TOKEN = re.compile(
    r"""\s*(?:(?P<str>'(?:[^']|'')*')
          |(?P<num>\d+(?:\.\d+)?)
          |(?P<word>[A-Za-z_][A-Za-z0-9_\-]*)
          |(?P<punct><>|<=|>=|!=|=|<|>|\(|\)|,|\.|\*|:|\[|\]|-)
        )""",
    re.VERBOSE,
)


@dataclass
class QTok:
    kind: str  # WORD, STRING, NUM, PUNCT, PARAM, END
    text: str
    value: object = None
    param: Optional[Param] = None


def tokenize_query(template: QueryTemplate) -> list[QTok]:
    tokens: list[QTok] = []
    for seg in template.segments:
        if isinstance(seg, Param):
            tokens.append(QTok("PARAM", f"${seg.var}", param=seg))
            continue
        pos = 0
        while pos < len(seg):
            if seg[pos] in " \t\r\n":
                pos += 1
                continue
            m = _Q_TOKEN.match(seg, pos)
            if m is None or not m.group().strip():
                raise UnsupportedSyntax(
                    f"cannot tokenize query near {seg[pos:pos + 20]!r}")
            pos = m.end()
            if m.lastgroup == "str":
                raw = m.group().strip()
                tokens.append(QTok("STRING", raw, raw[1:-1].replace("''", "'")))
            elif m.lastgroup == "num":
                raw = m.group().strip()
                val = float(raw) if "." in raw else int(raw)
                tokens.append(QTok("NUM", raw, val))
            elif m.lastgroup == "word":
                tokens.append(QTok("WORD", m.group().strip()))
            else:
                tokens.append(QTok("PUNCT", m.group().strip()))
    tokens.append(QTok("END", ""))
    return tokens


def tokenize_text(text: str) -> list[QTok]:
    return tokenize_query(QueryTemplate(text, [text]))


class _Cursor:
    def __init__(self, tokens: list[QTok]):
        self.tokens = tokens
        self.i = 0

    def peek(self, ahead: int = 0) -> QTok:
        return self.tokens[min(self.i + ahead, len(self.tokens) - 1)]

    def next(self) -> QTok:
        tok = self.peek()
        if tok.kind != "END":
            self.i += 1
        return tok

    def at_word(self, *words: str) -> bool:
        tok = self.peek()
        return tok.kind == "WORD" and tok.text.lower() in words

    def take_word(self, *words: str) -> bool:
        if self.at_word(*words):
            self.next()
            return True
        return False

    def expect_word(self, word: str):
        if not self.take_word(word):
            raise UnsupportedSyntax(f"expected {word!r}, got {self.peek().text!r}")

    def at_punct(self, p: str) -> bool:
        tok = self.peek()
        return tok.kind == "PUNCT" and tok.text == p

    def take_punct(self, p: str) -> bool:
        if self.at_punct(p):
            self.next()
            return True
        return False

    def expect_punct(self, p: str):
        if not self.take_punct(p):
            raise UnsupportedSyntax(f"expected {p!r}, got {self.peek().text!r}")


# --- SQL subset ---------------------------------------------------------------

@dataclass
class SqlCol:
    table: Optional[str]
    name: str


@dataclass
class SqlLit:
    value: object


@dataclass
class SqlParam:
    param: Param


@dataclass
class SqlLower:
    arg: "SqlScalar"


@dataclass
class SqlAgg:
    func: str            # sum | count
    arg: Optional[SqlCol]  # None for count(*)


SqlScalar = object  # SqlCol | SqlLit | SqlParam | SqlLower | SqlAgg


@dataclass
class SqlCmp:
    op: str  # = | in | ilike
    left: SqlScalar
    right: object  # scalar, list of SqlLit, or SqlParam


@dataclass
class SqlBool:
    op: str  # AND | OR
    operands: list


@dataclass
class TableRef:
    name: Optional[str]          # base table name, None for parameters
    param: Optional[Param]       # $relation parameter
    alias: Optional[str]

    @property
    def binding(self) -> str:
        return self.alias or self.name or f"${self.param.var}"


@dataclass
class SelectItem:
    expr: SqlScalar
    alias: Optional[str]


@dataclass
class SqlSelect:
    distinct: bool
    items: list[SelectItem]
    tables: list[TableRef]
    where: Optional[object]
    group_by: list[SqlCol] = field(default_factory=list)
    order_by: Optional[tuple[SqlCol, bool]] = None  # (col, ascending)
    limit: Optional[int] = None

    def classify(self) -> str:
        """Query family used by cost featurization."""
        if len(self.tables) == 2:
            return "type2"
        if self.where is not None and _contains_in(self.where):
            return "type1"
        return "scan"


def _contains_in(pred) -> bool:
    if isinstance(pred, SqlCmp):
        return pred.op == "in"
    if isinstance(pred, SqlBool):
        return any(_contains_in(p) for p in pred.operands)
    return False


def parse_sql(template: QueryTemplate) -> SqlSelect:
    cur = _Cursor(tokenize_query(template))
    cur.expect_word("select")
    distinct = cur.take_word("distinct")
    items = [_parse_select_item(cur)]
    while cur.take_punct(","):
        items.append(_parse_select_item(cur))
    cur.expect_word("from")
    tables = [_parse_table_ref(cur)]
    if cur.take_punct(","):
        tables.append(_parse_table_ref(cur))
    if len(tables) > 2 or cur.at_word("join"):
        raise UnsupportedSyntax("at most two relations in FROM (comma join)")
    where = _parse_sql_or(cur) if cur.take_word("where") else None
    group_by: list[SqlCol] = []
    if cur.take_word("group"):
        cur.expect_word("by")
        group_by.append(_parse_col(cur))
        while cur.take_punct(","):
            group_by.append(_parse_col(cur))
    order_by = None
    if cur.take_word("order"):
        cur.expect_word("by")
        col = _parse_col(cur)
        asc = True
        if cur.take_word("desc"):
            asc = False
        else:
            cur.take_word("asc")
        order_by = (col, asc)
    limit = None
    if cur.take_word("limit"):
        tok = cur.next()
        if tok.kind != "NUM" or not isinstance(tok.value, int):
            raise UnsupportedSyntax("LIMIT expects an integer")
        limit = tok.value
    if cur.peek().kind != "END":
        raise UnsupportedSyntax(f"trailing tokens in SQL query: {cur.peek().text!r}")
    return SqlSelect(distinct, items, tables, where, group_by, order_by, limit)


def _parse_select_item(cur: _Cursor) -> SelectItem:
    if cur.at_punct("*"):
        raise StarNotSupported("SELECT * is not supported; list columns explicitly")
    expr = _parse_scalar(cur)
    alias = None
    if cur.take_word("as"):
        alias = cur.next().text
    return SelectItem(expr, alias)


def _parse_table_ref(cur: _Cursor) -> TableRef:
    tok = cur.next()
    if tok.kind == "PARAM":
        name, param = None, tok.param
    elif tok.kind == "WORD":
        name, param = tok.text, None
    else:
        raise UnsupportedSyntax(f"bad table reference {tok.text!r}")
    alias = None
    nxt = cur.peek()
    if nxt.kind == "WORD" and nxt.text.lower() not in (
            "where", "group", "order", "limit", "join"):
        alias = cur.next().text
    return TableRef(name, param, alias)


def _parse_col(cur: _Cursor) -> SqlCol:
    tok = cur.next()
    if tok.kind != "WORD":
        raise UnsupportedSyntax(f"expected column name, got {tok.text!r}")
    if cur.take_punct("."):
        col = cur.next()
        return SqlCol(tok.text, col.text)
    return SqlCol(None, tok.text)


def _parse_scalar(cur: _Cursor) -> SqlScalar:
    tok = cur.peek()
    if tok.kind == "PARAM":
        cur.next()
        return SqlParam(tok.param)
    if tok.kind == "STRING":
        cur.next()
        return SqlLit(tok.value)
    if tok.kind == "NUM":
        cur.next()
        return SqlLit(tok.value)
    if tok.kind == "WORD" and tok.text.lower() == "lower":
        cur.next()
        cur.expect_punct("(")
        arg = _parse_scalar(cur)
        cur.expect_punct(")")
        return SqlLower(arg)
    if tok.kind == "WORD" and tok.text.lower() in ("sum", "count"):
        func = cur.next().text.lower()
        cur.expect_punct("(")
        if cur.take_punct("*"):
            arg = None
        else:
            arg = _parse_col(cur)
        cur.expect_punct(")")
        return SqlAgg(func, arg)
    if tok.kind == "WORD":
        return _parse_col(cur)
    raise UnsupportedSyntax(f"unsupported scalar expression at {tok.text!r}")


def _parse_sql_or(cur: _Cursor):
    left = _parse_sql_and(cur)
    operands = [left]
    while cur.take_word("or"):
        operands.append(_parse_sql_and(cur))
    return operands[0] if len(operands) == 1 else SqlBool("OR", operands)


def _parse_sql_and(cur: _Cursor):
    left = _parse_sql_pred(cur)
    operands = [left]
    while cur.take_word("and"):
        operands.append(_parse_sql_pred(cur))
    return operands[0] if len(operands) == 1 else SqlBool("AND", operands)


def _parse_sql_pred(cur: _Cursor):
    if cur.take_punct("("):
        inner = _parse_sql_or(cur)
        cur.expect_punct(")")
        return inner
    left = _parse_scalar(cur)
    if cur.take_word("in"):
        if cur.peek().kind == "PARAM":
            return SqlCmp("in", left, SqlParam(cur.next().param))
        cur.expect_punct("(")
        vals = []
        while not cur.at_punct(")"):
            tok = cur.next()
            if tok.kind not in ("STRING", "NUM"):
                raise UnsupportedSyntax("IN list expects literals")
            vals.append(SqlLit(tok.value))
            cur.take_punct(",")
        cur.expect_punct(")")
        return SqlCmp("in", left, vals)
    if cur.take_word("ilike"):
        tok = cur.next()
        if tok.kind == "PARAM":
            return SqlCmp("ilike", left, SqlParam(tok.param))
        if tok.kind != "STRING":
            raise UnsupportedSyntax("ILIKE expects a string pattern")
        return SqlCmp("ilike", left, SqlLit(tok.value))
    if cur.take_punct("="):
        right = _parse_scalar(cur)
        return SqlCmp("=", left, right)
    raise UnsupportedSyntax(f"unsupported predicate near {cur.peek().text!r}")


def sql_columns_used(sel: SqlSelect) -> list[SqlCol]:
    cols: list[SqlCol] = []

    def scan_scalar(s):
        if isinstance(s, SqlCol):
            cols.append(s)
        elif isinstance(s, SqlLower):
            scan_scalar(s.arg)
        elif isinstance(s, SqlAgg) and s.arg is not None:
            cols.append(s.arg)

    def scan_pred(p):
        if isinstance(p, SqlCmp):
            scan_scalar(p.left)
            if isinstance(p.right, (SqlCol, SqlLower, SqlAgg)):
                scan_scalar(p.right)
        elif isinstance(p, SqlBool):
            for q in p.operands:
                scan_pred(q)

    for item in sel.items:
        scan_scalar(item.expr)
    if sel.where is not None:
        scan_pred(sel.where)
    for c in sel.group_by:
        cols.append(c)
    if sel.order_by:
        cols.append(sel.order_by[0])
    return cols


def infer_sql_schema(sel: SqlSelect,
                     table_schema: Callable[[TableRef], dict[str, str]]) -> dict[str, str]:
    """Output schema of a subset query, columns in SELECT order, aliases honored."""
    schemas = {t.binding: table_schema(t) for t in sel.tables}

    def resolve(col: SqlCol) -> str:
        if col.table is not None:
            if col.table not in schemas:
                raise UnknownRelationOrColumn(f"unknown table alias {col.table!r}")
            schema = schemas[col.table]
            if col.name not in schema:
                raise UnknownRelationOrColumn(
                    f"column {col.name!r} not in {col.table}")
            return schema[col.name]
        hits = [s for s in schemas.values() if col.name in s]
        if not hits:
            raise UnknownRelationOrColumn(f"unknown column {col.name!r}")
        if len(hits) > 1:
            raise AmbiguousColumn(f"column {col.name!r} is ambiguous")
        return hits[0][col.name]

    def scalar_type(s) -> str:
        if isinstance(s, SqlCol):
            return resolve(s)
        if isinstance(s, SqlLit):
            return {int: "Integer", float: "Double", str: "String",
                    bool: "Boolean"}[type(s.value)]
        if isinstance(s, SqlLower):
            scalar_type(s.arg)
            return "String"
        if isinstance(s, SqlAgg):
            if s.arg is not None:
                resolve(s.arg)
            return "Integer" if s.func == "count" else "Double"
        if isinstance(s, SqlParam):
            return "String"
        raise UnsupportedSyntax(f"cannot type {s!r}")

    # validate predicate column references even though they produce no output
    for col in sql_columns_used(sel):
        resolve(col)

    out: dict[str, str] = {}
    for item in sel.items:
        name = item.alias
        if name is None:
            if isinstance(item.expr, SqlCol):
                name = item.expr.name
            elif isinstance(item.expr, SqlAgg):
                name = item.expr.func
            elif isinstance(item.expr, SqlLower) and isinstance(item.expr.arg, SqlCol):
                name = item.expr.arg.name
            else:
                raise UnsupportedSyntax("select item needs an alias")
        if name in out:
            raise AmbiguousColumn(f"duplicate output column {name!r}")
        out[name] = scalar_type(item.expr)
    return out


# --- Cypher subset -------------------------------------------------------------

@dataclass
class NodePat:
    var: Optional[str]
    label: Optional[str]


@dataclass
class CyProp:
    var: str
    prop: str


@dataclass
class CyIn:
    left: CyProp
    right: object  # SqlParam-style Param or list of literals


@dataclass
class CyContains:
    left: CyProp
    needle: object  # str literal or Param


@dataclass
class CyEq:
    left: CyProp
    right: object  # literal or CyProp


@dataclass
class CyBool:
    op: str
    operands: list


@dataclass
class CyDynamic:
    """A whole predicate supplied at runtime as a String parameter."""
    param: Param


@dataclass
class CypherQuery:
    node: NodePat
    edge_label: Optional[str] = None
    directed: bool = False
    other: Optional[NodePat] = None
    where: Optional[object] = None
    returns: list[tuple[CyProp, str]] = field(default_factory=list)
    is_edge_pattern: bool = False

    def classify(self) -> str:
        if self.where is not None and _cy_contains(self.where):
            return "type2"
        return "type1"


def _cy_contains(pred) -> bool:
    if isinstance(pred, CyContains):
        return True
    if isinstance(pred, CyDynamic):
        return True  # dynamic predicates are CONTAINS disjunctions in this subset
    if isinstance(pred, CyBool):
        return any(_cy_contains(p) for p in pred.operands)
    return False


def parse_cypher(template: QueryTemplate) -> CypherQuery:
    cur = _Cursor(tokenize_query(template))
    cur.expect_word("match")
    node = _parse_node_pat(cur)
    q = CypherQuery(node)
    if cur.take_punct("-"):
        q.is_edge_pattern = True
        cur.expect_punct("[")
        if cur.peek().kind == "WORD":  # optional relationship variable
            cur.next()
        if cur.take_punct(":"):
            q.edge_label = cur.next().text
        cur.expect_punct("]")
        cur.expect_punct("-")
        if cur.take_punct(">"):
            q.directed = True
        q.other = _parse_node_pat(cur)
    if cur.take_word("where"):
        q.where = _parse_cy_or(cur)
    cur.expect_word("return")
    while True:
        prop = _parse_cy_prop(cur)
        alias = prop.prop
        if cur.take_word("as"):
            alias = cur.next().text
        q.returns.append((prop, alias))
        if not cur.take_punct(","):
            break
    if cur.peek().kind != "END":
        raise UnsupportedSyntax(f"trailing tokens in Cypher query: {cur.peek().text!r}")
    return q


def _parse_node_pat(cur: _Cursor) -> NodePat:
    cur.expect_punct("(")
    var = None
    label = None
    if cur.peek().kind == "WORD":
        var = cur.next().text
    if cur.take_punct(":"):
        label = cur.next().text
    cur.expect_punct(")")
    return NodePat(var, label)


def _parse_cy_prop(cur: _Cursor) -> CyProp:
    var = cur.next()
    if var.kind != "WORD":
        raise UnsupportedSyntax(f"expected property reference, got {var.text!r}")
    cur.expect_punct(".")
    prop = cur.next()
    return CyProp(var.text, prop.text)


def _parse_cy_or(cur: _Cursor):
    operands = [_parse_cy_and(cur)]
    while cur.take_word("or"):
        operands.append(_parse_cy_and(cur))
    return operands[0] if len(operands) == 1 else CyBool("OR", operands)


def _parse_cy_and(cur: _Cursor):
    operands = [_parse_cy_pred(cur)]
    while cur.take_word("and"):
        operands.append(_parse_cy_pred(cur))
    return operands[0] if len(operands) == 1 else CyBool("AND", operands)


def _parse_cy_pred(cur: _Cursor):
    if cur.take_punct("("):
        inner = _parse_cy_or(cur)
        cur.expect_punct(")")
        return inner
    if cur.peek().kind == "PARAM":
        return CyDynamic(cur.next().param)
    left = _parse_cy_prop(cur)
    if cur.take_word("in"):
        tok = cur.next()
        if tok.kind == "PARAM":
            return CyIn(left, tok.param)
        if tok.kind == "PUNCT" and tok.text == "[":
            vals = []
            while not cur.at_punct("]"):
                lit = cur.next()
                vals.append(lit.value)
                cur.take_punct(",")
            cur.expect_punct("]")
            return CyIn(left, vals)
        raise UnsupportedSyntax("IN expects a $list parameter or a literal list")
    if cur.take_word("contains"):
        tok = cur.next()
        if tok.kind == "STRING":
            return CyContains(left, tok.value)
        if tok.kind == "PARAM":
            return CyContains(left, tok.param)
        raise UnsupportedSyntax("CONTAINS expects a string")
    if cur.take_punct("="):
        tok = cur.peek()
        if tok.kind in ("STRING", "NUM"):
            cur.next()
            return CyEq(left, tok.value)
        if tok.kind == "PARAM":
            cur.next()
            return CyEq(left, tok.param)
        return CyEq(left, _parse_cy_prop(cur))
    raise UnsupportedSyntax(f"unsupported Cypher predicate near {cur.peek().text!r}")


def parse_dynamic_cypher_predicate(text: str):
    """Parse predicate text spliced in for a String parameter at runtime."""
    cur = _Cursor(tokenize_text(text))
    pred = _parse_cy_or(cur)
    if cur.peek().kind != "END":
        raise UnsupportedSyntax("trailing tokens in dynamic predicate")
    return pred


# --- Solr-style text queries ----------------------------------------------------

@dataclass
class SolrClause:
    field: str
    term: str


@dataclass
class SolrQuery:
    # disjunction of conjunctions; None when the whole clause body is dynamic
    groups: Optional[list[list[SolrClause]]]
    dynamic: Optional[Param] = None
    rows: Optional[int] = None


def parse_solr(template: QueryTemplate) -> SolrQuery:
    """Grammar: ``q= <clauses> [& rows=N]``, clauses = OR/AND of field:term."""
    # split on the & separator at the segment level to keep params intact
    segs_q: list[object] = []
    segs_rows: list[object] = []
    target = segs_q
    for seg in template.segments:
        if isinstance(seg, str) and "&" in seg:
            before, after = seg.split("&", 1)
            target.append(before)
            target = segs_rows
            target.append(after)
        else:
            target.append(seg)
    q = _parse_solr_q(QueryTemplate("".join(
        s if isinstance(s, str) else f"${s.var}" for s in segs_q), segs_q))
    rows = None
    if segs_rows:
        text = "".join(s for s in segs_rows if isinstance(s, str))
        m = re.search(r"rows\s*=\s*(\d+)", text)
        if not m:
            raise UnsupportedSyntax("expected rows=N after &")
        rows = int(m.group(1))
    q.rows = rows
    return q


def _parse_solr_q(template: QueryTemplate) -> SolrQuery:
    cur = _Cursor(tokenize_query(template))
    cur.expect_word("q")
    cur.expect_punct("=")
    if cur.peek().kind == "PARAM" and cur.peek(1).kind == "END":
        return SolrQuery(None, dynamic=cur.next().param)
    groups = [_parse_solr_group(cur)]
    while cur.take_word("or"):
        groups.append(_parse_solr_group(cur))
    if cur.peek().kind != "END":
        raise UnsupportedSyntax(f"trailing tokens in text query: {cur.peek().text!r}")
    return SolrQuery(groups)


def _parse_solr_group(cur: _Cursor) -> list[SolrClause]:
    clauses = [_parse_solr_clause(cur)]
    while cur.take_word("and"):
        clauses.append(_parse_solr_clause(cur))
    return clauses


def _parse_solr_clause(cur: _Cursor) -> SolrClause:
    fld = cur.next()
    if fld.kind != "WORD":
        raise UnsupportedSyntax(f"expected field name, got {fld.text!r}")
    cur.expect_punct(":")
    term = cur.next()
    if term.kind not in ("WORD", "STRING", "NUM"):
        raise UnsupportedSyntax(f"expected term, got {term.text!r}")
    return SolrClause(fld.text, str(term.value if term.kind != "WORD" else term.text))


def parse_dynamic_solr_clauses(text: str) -> list[list[SolrClause]]:
    cur = _Cursor(tokenize_text(text))
    groups = [_parse_solr_group(cur)]
    while cur.take_word("or"):
        groups.append(_parse_solr_group(cur))
    if cur.peek().kind != "END":
        raise UnsupportedSyntax("trailing tokens in dynamic text query")
    return groups
