"""Embedded relational engine for the supported SQL subset.

Evaluation is nested-loop with a hash-join fast path for two-table equality
joins (LOWER-wrapped operands included).  Engines hold immutable base tables
plus run-scoped temporaries registered by data movement.
"""

from __future__ import annotations

import re
from typing import Callable, Optional

from ..ast_nodes import Param
from ..errors import (TypeMismatch, UnknownRelationOrColumn, UnsupportedSyntax)
from ..querylang import (SelectItem, SqlAgg, SqlBool, SqlCmp, SqlCol, SqlLit,
                         SqlLower, SqlParam, SqlSelect, TableRef,
                         infer_sql_schema)
from ..values import Relation


class RelationalEngine:
    def __init__(self, alias: str):
        self.alias = alias
        self.tables: dict[str, Relation] = {}
        self.temps: set[str] = set()

    def register(self, name: str, rel: Relation, temp: bool = False):
        self.tables[name] = rel
        if temp:
            self.temps.add(name)

    def drop_temps(self):
        for name in self.temps:
            self.tables.pop(name, None)
        self.temps.clear()

    def table(self, name: str) -> Relation:
        if name not in self.tables:
            raise UnknownRelationOrColumn(
                f"relation {name!r} not found in engine {self.alias}")
        return self.tables[name]

    def execute(self, sel: SqlSelect,
                param_value: Callable[[Param], object]) -> Relation:
        return execute_select(sel, self._resolver(param_value), param_value)

    def _resolver(self, param_value):
        def resolve(ref: TableRef) -> Relation:
            if ref.param is not None:
                value = param_value(ref.param)
                if not isinstance(value, Relation):
                    raise TypeMismatch("Relation", type(value).__name__)
                return value
            return self.table(ref.name)
        return resolve


# --- evaluation ---------------------------------------------------------------

class _RowEnv:
    """Bindings of table alias -> (column list, row tuple)."""

    __slots__ = ("bindings",)

    def __init__(self, bindings):
        self.bindings = bindings

    def lookup(self, col: SqlCol):
        if col.table is not None:
            if col.table not in self.bindings:
                raise UnknownRelationOrColumn(f"unknown table alias {col.table!r}")
            cols, row = self.bindings[col.table]
            if col.name not in cols:
                raise UnknownRelationOrColumn(
                    f"column {col.name!r} not in {col.table}")
            return row[cols.index(col.name)]
        hits = [b for b in self.bindings.values() if col.name in b[0]]
        if len(hits) != 1:
            raise UnknownRelationOrColumn(f"column {col.name!r} unknown or ambiguous")
        cols, row = hits[0]
        return row[cols.index(col.name)]


def execute_select(sel: SqlSelect, resolve_table: Callable[[TableRef], Relation],
                   param_value: Callable[[Param], object]) -> Relation:
    tables = [(t.binding, resolve_table(t)) for t in sel.tables]
    schema = infer_sql_schema(sel, lambda ref: resolve_table(ref).schema)

    def scalar(env: _RowEnv, s):
        if isinstance(s, SqlCol):
            return env.lookup(s)
        if isinstance(s, SqlLit):
            return s.value
        if isinstance(s, SqlLower):
            v = scalar(env, s.arg)
            return v.lower() if isinstance(v, str) else v
        if isinstance(s, SqlParam):
            return param_value(s.param)
        raise UnsupportedSyntax(f"cannot evaluate {s!r} per row")

    def pred(env: _RowEnv, p) -> bool:
        if isinstance(p, SqlBool):
            if p.op == "AND":
                return all(pred(env, q) for q in p.operands)
            return any(pred(env, q) for q in p.operands)
        if isinstance(p, SqlCmp):
            left = scalar(env, p.left)
            if p.op == "=":
                return _eq(left, scalar(env, p.right))
            if p.op == "in":
                if isinstance(p.right, SqlParam):
                    vals = param_value(p.right.param)
                else:
                    vals = [v.value for v in p.right]
                return any(_eq(left, v) for v in vals)
            if p.op == "ilike":
                patt = (param_value(p.right.param)
                        if isinstance(p.right, SqlParam) else p.right.value)
                return _ilike(str(left), str(patt))
        raise UnsupportedSyntax(f"cannot evaluate predicate {p!r}")

    rows = _enumerate_rows(sel, tables, pred, scalar, param_value)

    agg_items = [i for i in sel.items if isinstance(i.expr, SqlAgg)]
    if sel.group_by or agg_items:
        out_rows = _aggregate(sel, rows, scalar)
    else:
        out_rows = [tuple(scalar(env, item.expr) for item in sel.items)
                    for env in rows]

    if sel.distinct:
        out_rows = list(dict.fromkeys(out_rows))
    if sel.order_by is not None and not (sel.group_by or agg_items):
        col, asc = sel.order_by
        names = list(schema)
        if col.name in names:
            idx = names.index(col.name)
            out_rows.sort(key=lambda r: r[idx], reverse=not asc)
        else:
            # ordering column not projected: order the row envs instead
            raise UnsupportedSyntax("ORDER BY column must appear in SELECT list")
    if sel.limit is not None:
        out_rows = out_rows[:sel.limit]
    return Relation(schema, out_rows)


def _enumerate_rows(sel, tables, pred, scalar, param_value):
    if len(tables) == 1:
        binding, rel = tables[0]
        cols = rel.columns
        envs = (_RowEnv({binding: (cols, row)}) for row in rel.rows)
        if sel.where is None:
            return list(envs)
        return [env for env in envs if pred(env, sel.where)]

    (b1, r1), (b2, r2) = tables
    join_key, residual = _find_equi_join(sel.where, b1, r1, b2, r2)
    envs_out = []
    if join_key is not None:
        left_expr, right_expr = join_key
        index: dict[object, list] = {}
        for row in r2.rows:
            env = _RowEnv({b2: (r2.columns, row)})
            index.setdefault(_norm(scalar(env, right_expr)), []).append(row)
        for row1 in r1.rows:
            env1 = _RowEnv({b1: (r1.columns, row1)})
            for row2 in index.get(_norm(scalar(env1, left_expr)), []):
                env = _RowEnv({b1: (r1.columns, row1), b2: (r2.columns, row2)})
                if residual is None or pred(env, residual):
                    envs_out.append(env)
        return envs_out
    for row1 in r1.rows:
        for row2 in r2.rows:
            env = _RowEnv({b1: (r1.columns, row1), b2: (r2.columns, row2)})
            if sel.where is None or pred(env, sel.where):
                envs_out.append(env)
    return envs_out


def _find_equi_join(where, b1, r1, b2, r2):
    """Return ((left_expr, right_expr), residual_pred) for a hash join, or
    (None, where).  Only top-level AND conjuncts are inspected."""
    if where is None:
        return None, None
    conjuncts = where.operands if isinstance(where, SqlBool) and where.op == "AND" \
        else [where]

    def side_of(expr):
        core = expr.arg if isinstance(expr, SqlLower) else expr
        if not isinstance(core, SqlCol):
            return None
        if core.table == b1 or (core.table is None and core.name in r1.schema
                                and core.name not in r2.schema):
            return 1
        if core.table == b2 or (core.table is None and core.name in r2.schema
                                and core.name not in r1.schema):
            return 2
        return None

    for i, c in enumerate(conjuncts):
        if isinstance(c, SqlCmp) and c.op == "=":
            s_left, s_right = side_of(c.left), side_of(c.right)
            if s_left and s_right and s_left != s_right:
                left, right = (c.left, c.right) if s_left == 1 else (c.right, c.left)
                rest = conjuncts[:i] + conjuncts[i + 1:]
                residual = None if not rest else (
                    rest[0] if len(rest) == 1 else SqlBool("AND", rest))
                return (left, right), residual
    return None, where


def _aggregate(sel: SqlSelect, envs, scalar):
    groups: dict[tuple, list] = {}
    for env in envs:
        key = tuple(_norm(env.lookup(c)) for c in sel.group_by)
        groups.setdefault(key, []).append(env)
    if not sel.group_by:
        groups.setdefault((), [])
        if envs:
            groups[()] = envs

    out = []
    for key in sorted(groups, key=lambda k: tuple(_sortable(x) for x in k)):
        members = groups[key]
        row = []
        for item in sel.items:
            expr = item.expr
            if isinstance(expr, SqlAgg):
                if expr.func == "count":
                    row.append(len(members))
                else:
                    row.append(float(sum(float(m.lookup(expr.arg)) for m in members)))
            else:
                core = expr.arg if isinstance(expr, SqlLower) else expr
                if not isinstance(core, SqlCol) or not any(
                        _same_col(core, g) for g in sel.group_by):
                    raise UnsupportedSyntax(
                        "non-aggregate select item must be a GROUP BY column")
                row.append(scalar(members[0], expr))
        out.append(tuple(row))
    return out


def _same_col(a: SqlCol, b: SqlCol) -> bool:
    return a.name == b.name and (a.table is None or b.table is None or a.table == b.table)


def _norm(v):
    if isinstance(v, float) and v.is_integer():
        return int(v)
    return v


def _sortable(v):
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return (0, float(v), "")
    return (1, 0.0, str(v))


def _eq(a, b) -> bool:
    if isinstance(a, (int, float)) and isinstance(b, (int, float)) \
            and not isinstance(a, bool) and not isinstance(b, bool):
        return float(a) == float(b)
    return a == b


def _ilike(value: str, pattern: str) -> bool:
    regex = "^" + "".join(".*" if ch == "%" else re.escape(ch)
                          for ch in pattern) + "$"
    return re.match(regex, value, re.IGNORECASE) is not None
