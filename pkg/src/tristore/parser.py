"""Recursive-descent parser producing the script AST.

Both lambda arrows (``->`` and ``=>``) are accepted and normalized; the
analysis block may be delimited by braces or parentheses.  ``for``/``while``
are rejected up front: the language iterates with map/reduce/where only.
"""

from __future__ import annotations

from .ast_nodes import (Assignment, BinCmp, ColRef, Expr, FuncCall,
                        GraphTemplate, Index, ListLit, Literal, Logic,
                        LhsVar, MapExpr, Member, Query, ReduceExpr, Script,
                        Store, StoreColumn, TupleLit, UnderscoreRef, VarRef,
                        WhereExpr, parse_template)
from .errors import AdilSyntaxError, Span
from .lexer import QUERY_KEYWORDS, Token, tokenize_source


def parse_source(text: str) -> Script:
    return parse(tokenize_source(text))


def parse(tokens: list[Token]) -> Script:
    return _Parser(tokens).parse_script()


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.i = 0

    # --- token plumbing ---

    def peek(self, ahead: int = 0) -> Token:
        return self.tokens[min(self.i + ahead, len(self.tokens) - 1)]

    def next(self) -> Token:
        tok = self.peek()
        if tok.kind != "EOF":
            self.i += 1
        return tok

    def at(self, kind: str, text: str | None = None) -> bool:
        tok = self.peek()
        return tok.kind == kind and (text is None or tok.text.lower() == text)

    def expect(self, kind: str, text: str | None = None) -> Token:
        if not self.at(kind, text):
            self.fail(f"unexpected token {self.peek().text!r}",
                      (text or kind,))
        return self.next()

    def fail(self, message: str, expected: tuple[str, ...] = ()):
        tok = self.peek()
        raise AdilSyntaxError(message, expected, tok.span.line, tok.span.col)

    # --- grammar ---

    def parse_script(self) -> Script:
        start = self.peek().span
        self.expect("KEYWORD", "use")
        alias = self.expect("IDENT").text
        if self.at("KEYWORD", "as"):  # `use X as polystore;`
            self.next()
            self.expect("IDENT")
        self.expect("SEMI")
        self.expect("KEYWORD", "create")
        self.expect("KEYWORD", "analysis")
        name = self.expect("IDENT").text
        self.expect("KEYWORD", "as")
        close = "RBRACE" if self.at("LBRACE") else "RPAREN"
        self.next() if self.peek().kind in ("LBRACE", "LPAREN") else self.fail(
            "expected analysis block", ("{", "("))
        statements = []
        while not self.at(close):
            statements.append(self.parse_statement())
        self.next()
        if self.at("SEMI"):
            self.next()
        self.expect("EOF")
        return Script(alias, name, statements,
                      span=Span(start.start, self.peek().span.end, start.line, start.col))

    def parse_statement(self):
        tok = self.peek()
        if tok.kind == "IDENT" and tok.text.lower() in ("for", "while"):
            self.fail(f"{tok.text!r} loops are not part of the language; "
                      "use map/reduce/where", ())
        if self.at("KEYWORD", "store"):
            return self.parse_store()
        lhs = [self.parse_lhs_var()]
        while self.at("COMMA"):
            self.next()
            lhs.append(self.parse_lhs_var())
        names = [v.name for v in lhs]
        if len(set(names)) != len(names):
            self.fail("duplicate variable on assignment left-hand side", ())
        self.expect("ASSIGN")
        rhs = self.parse_expr()
        # a trailing lhs annotation also validates query results: attach it
        if len(lhs) == 1 and lhs[0].annotation and isinstance(rhs, Query) \
                and rhs.annotation is None:
            rhs.annotation = lhs[0].annotation
        end = self.expect("SEMI")
        return Assignment(lhs, rhs, span=_join(tok.span, end.span))

    def parse_lhs_var(self) -> LhsVar:
        name = self.expect("IDENT").text
        annotation = None
        if self.at("LT"):
            annotation = self.parse_annotation()
        return LhsVar(name, annotation)

    def parse_annotation(self) -> dict[str, str]:
        self.expect("LT")
        ann: dict[str, str] = {}
        while not self.at("GT"):
            col = self.expect("IDENT").text
            self.expect("COLON")
            typ = self.expect("IDENT").text
            if typ not in ("Integer", "Double", "String", "Boolean"):
                self.fail(f"unknown type {typ!r} in annotation",
                          ("Integer", "Double", "String", "Boolean"))
            if col in ann:
                self.fail(f"duplicate column {col!r} in annotation", ())
            ann[col] = typ
            if self.at("COMMA"):
                self.next()
        self.expect("GT")
        if not ann:
            self.fail("empty schema annotation", ())
        return ann

    def parse_store(self) -> Store:
        start = self.expect("KEYWORD", "store").span
        self.expect("LPAREN")
        var = self.expect("IDENT").text
        var_alias = self.expect("IDENT").text if self.at("IDENT") else None
        db_name, table_name, columns = None, None, None
        while self.at("COMMA"):
            self.next()
            key = self.expect("IDENT").text
            self.expect("EQ")
            if key == "dbName":
                db_name = self.expect("STRING").value
            elif key in ("tableName", "tName"):
                table_name = self.expect("STRING").value
            elif key in ("columnName", "cName"):
                columns = self.parse_store_columns()
            else:
                self.fail(f"unknown store argument {key!r}",
                          ("dbName", "tableName", "columnName"))
        self.expect("RPAREN")
        end = self.expect("SEMI").span
        if db_name is None:
            raise AdilSyntaxError("store requires a dbName argument", ("dbName",),
                                  start.line, start.col)
        return Store(var, var_alias, db_name, table_name, columns,
                     span=_join(start, end))

    def parse_store_columns(self) -> list[StoreColumn]:
        self.expect("LBRACKET")
        cols = []
        while not self.at("RBRACKET"):
            self.expect("LPAREN")
            target = self.expect("STRING").value
            self.expect("COMMA")
            src = self.expect("IDENT").text
            self.expect("DOT")
            member = self.expect("IDENT").text
            self.expect("RPAREN")
            cols.append(StoreColumn(target, src, member))
            if self.at("COMMA"):
                self.next()
        self.expect("RBRACKET")
        return cols

    # --- expressions, lowest precedence first ---

    def parse_expr(self) -> Expr:
        expr = self.parse_or()
        while self.at("KEYWORD", "where"):
            self.next()
            predicate = self.parse_or()
            mode = _find_iteration_mode(predicate)
            expr = WhereExpr(expr, predicate, mode, span=_espan(expr, predicate))
        return expr

    def parse_or(self) -> Expr:
        expr = self.parse_and()
        while self.at("KEYWORD", "or"):
            self.next()
            rhs = self.parse_and()
            if isinstance(expr, Logic) and expr.op == "OR":
                expr.operands.append(rhs)
            else:
                expr = Logic("OR", [expr, rhs], span=_espan(expr, rhs))
        return expr

    def parse_and(self) -> Expr:
        expr = self.parse_not()
        while self.at("KEYWORD", "and"):
            self.next()
            rhs = self.parse_not()
            if isinstance(expr, Logic) and expr.op == "AND":
                expr.operands.append(rhs)
            else:
                expr = Logic("AND", [expr, rhs], span=_espan(expr, rhs))
        return expr

    def parse_not(self) -> Expr:
        if self.at("KEYWORD", "not"):
            tok = self.next()
            operand = self.parse_not()
            return Logic("NOT", [operand], span=_join(tok.span, operand.span))
        return self.parse_cmp()

    def parse_cmp(self) -> Expr:
        left = self.parse_postfix()
        ops = {"GT": ">", "EQEQ": "==", "LT": "<"}
        if self.peek().kind in ops:
            op = ops[self.next().kind]
            right = self.parse_postfix()
            return BinCmp(op, left, right, span=_espan(left, right))
        return left

    def parse_postfix(self) -> Expr:
        expr = self.parse_primary()
        while True:
            if self.at("DOT"):
                nxt = self.peek(1)
                if nxt.kind == "KEYWORD" and nxt.text.lower() in ("map", "reduce"):
                    self.next()
                    kw = self.next().text.lower()
                    expr = (self.parse_map_tail(expr) if kw == "map"
                            else self.parse_reduce_tail(expr))
                    continue
                self.next()
                member = self.expect("IDENT").text
                expr = Member(expr, member, span=expr.span)
                continue
            if self.at("LBRACKET"):
                self.next()
                index = self.parse_expr()
                end = self.expect("RBRACKET").span
                expr = Index(expr, index, span=_join(expr.span or end, end))
                continue
            return expr

    def parse_map_tail(self, source: Expr) -> MapExpr:
        self.expect("LPAREN")
        var = self.expect("IDENT").text
        self._expect_arrow()
        body = self.parse_expr()
        end = self.expect("RPAREN").span
        return MapExpr(source, var, body, span=_join(source.span or end, end))

    def parse_reduce_tail(self, source: Expr) -> ReduceExpr:
        self.expect("LPAREN")
        self.expect("LPAREN")
        var1 = self.expect("IDENT").text
        self.expect("COMMA")
        var2 = self.expect("IDENT").text
        self.expect("RPAREN")
        self._expect_arrow()
        body = self.parse_expr()
        end = self.expect("RPAREN").span
        if not (_references(body, var1) and _references(body, var2)):
            raise AdilSyntaxError(
                "reduce body must reference both lambda variables", (),
                (source.span or end).line, (source.span or end).col)
        return ReduceExpr(source, var1, var2, body, span=_join(source.span or end, end))

    def _expect_arrow(self):
        if self.peek().kind in ("ARROW", "FATARROW"):
            self.next()
        else:
            self.fail("expected lambda arrow", ("=>", "->"))

    def parse_primary(self) -> Expr:
        tok = self.peek()
        if tok.kind == "INT":
            self.next()
            return Literal(tok.value, "Integer", span=tok.span)
        if tok.kind == "DOUBLE":
            self.next()
            return Literal(tok.value, "Double", span=tok.span)
        if tok.kind == "MINUS" and self.peek(1).kind in ("INT", "DOUBLE"):
            self.next()
            num = self.next()
            prim = "Integer" if num.kind == "INT" else "Double"
            return Literal(-num.value, prim, span=_join(tok.span, num.span))
        if tok.kind == "STRING":
            self.next()
            return Literal(tok.value, "String", span=tok.span)
        if tok.kind == "BOOL":
            self.next()
            return Literal(tok.value, "Boolean", span=tok.span)
        if tok.kind == "LBRACKET":
            return self.parse_list_lit()
        if tok.kind == "LBRACE":
            return self.parse_tuple_lit()
        if tok.kind == "LPAREN":
            # either a parenthesized expression or a `(<schema>) query` prefix
            if self.peek(1).kind == "LT":
                self.next()
                ann = self.parse_annotation()
                self.expect("RPAREN")
                inner = self.parse_postfix()
                target = inner
                if not isinstance(target, Query):
                    self.fail("schema annotation must precede a query expression", ())
                target.annotation = ann
                return inner
            self.next()
            inner = self.parse_expr()
            self.expect("RPAREN")
            return inner
        if tok.kind == "IDENT":
            if tok.text == "_":
                return self.parse_underscore()
            if self.peek(1).kind == "LPAREN":
                return self.parse_call()
            self.next()
            return VarRef(tok.text, span=tok.span)
        self.fail(f"unexpected token {tok.text!r} in expression", ())

    def parse_underscore(self) -> UnderscoreRef:
        tok = self.expect("IDENT")
        mode = None
        if self.at("COLON"):
            self.next()
            mode = self.expect("IDENT").text
            if mode not in ("Row", "Col"):
                self.fail("iteration mode must be Row or Col", ("Row", "Col"))
        return UnderscoreRef(mode, span=tok.span)

    def parse_call(self) -> Expr:
        name_tok = self.expect("IDENT")
        name = name_tok.text
        self.expect("LPAREN")
        if name.lower() in QUERY_KEYWORDS:
            return self.parse_query_tail(name_tok)
        if name == "ConstructGraphFromRelation":
            return self.parse_construct_graph_tail(name_tok)
        args: list[Expr] = []
        named: dict[str, Expr] = {}
        while not self.at("RPAREN"):
            if self.at("IDENT") and self.peek(1).kind == "EQ":
                key = self.next().text
                self.next()
                if key in named:
                    self.fail(f"duplicate named argument {key!r}", ())
                named[key] = self.parse_expr()
            else:
                if named:
                    self.fail("positional argument after named argument", ())
                args.append(self.parse_expr())
            if self.at("COMMA"):
                self.next()
        end = self.expect("RPAREN").span
        return FuncCall(name, args, named, span=_join(name_tok.span, end))

    def parse_query_tail(self, name_tok: Token) -> Query:
        dialect = QUERY_KEYWORDS[name_tok.text.lower()]
        alias, engine_var = None, None
        if self.at("STRING"):
            alias = self.next().value
        elif self.at("IDENT"):
            engine_var = self.next().text
        elif not self.at("COMMA"):
            self.fail("query target must be an engine alias string or a variable", ())
        self.expect("COMMA")
        template_tok = self.expect("STRING")
        end = self.expect("RPAREN").span
        return Query(dialect, alias, engine_var, parse_template(template_tok.value),
                     span=_join(name_tok.span, end))

    def parse_construct_graph_tail(self, name_tok: Token) -> FuncCall:
        rel = self.parse_expr()
        self.expect("COMMA")
        template = self.parse_graph_template()
        end = self.expect("RPAREN").span
        return FuncCall("ConstructGraphFromRelation", [rel], {},
                        graph_template=template, span=_join(name_tok.span, end))

    def parse_graph_template(self) -> GraphTemplate:
        src_label, src_props = self.parse_node_pattern()
        self.expect("MINUS")
        self.expect("LBRACKET")
        self.expect("COLON")
        edge_label = self.expect("IDENT").text
        edge_props = self.parse_prop_map() if self.at("LBRACE") else {}
        self.expect("RBRACKET")
        directed = True
        if self.at("ARROW"):
            self.next()
        elif self.at("MINUS"):
            self.next()
            directed = False
        else:
            self.fail("expected -> or - after edge pattern", ("->", "-"))
        dst_label, dst_props = self.parse_node_pattern()
        return GraphTemplate(src_label, src_props, edge_label, edge_props,
                             dst_label, dst_props, directed)

    def parse_node_pattern(self) -> tuple[str, dict[str, ColRef]]:
        self.expect("LPAREN")
        self.expect("COLON")
        label = self.expect("IDENT").text
        props = self.parse_prop_map() if self.at("LBRACE") else {}
        self.expect("RPAREN")
        return label, props

    def parse_prop_map(self) -> dict[str, ColRef]:
        self.expect("LBRACE")
        props: dict[str, ColRef] = {}
        while not self.at("RBRACE"):
            key = self.expect("IDENT").text
            self.expect("COLON")
            if self.at("DOLLAR"):
                self.next()
            var = self.expect("IDENT").text
            self.expect("DOT")
            col = self.expect("IDENT").text
            props[key] = ColRef(var, col)
            if self.at("COMMA"):
                self.next()
        self.expect("RBRACE")
        return props

    def parse_list_lit(self) -> ListLit:
        start = self.expect("LBRACKET").span
        items = []
        while not self.at("RBRACKET"):
            items.append(self.parse_expr())
            if self.at("COMMA"):
                self.next()
        end = self.expect("RBRACKET").span
        return ListLit(items, span=_join(start, end))

    def parse_tuple_lit(self) -> TupleLit:
        start = self.expect("LBRACE").span
        items = []
        while not self.at("RBRACE"):
            items.append(self.parse_expr())
            if self.at("COMMA"):
                self.next()
        end = self.expect("RBRACE").span
        return TupleLit(items, span=_join(start, end))


def _join(a: Span, b: Span) -> Span:
    return Span(a.start, max(a.end, b.end), a.line, a.col)


def _espan(a: Expr, b: Expr) -> Span | None:
    if a.span is None or b.span is None:
        return a.span or b.span
    return _join(a.span, b.span)


def _find_iteration_mode(expr) -> str | None:
    if isinstance(expr, UnderscoreRef):
        return expr.mode
    for attr in ("left", "right", "source", "predicate", "body", "base", "index"):
        child = getattr(expr, attr, None)
        if isinstance(child, Expr):
            mode = _find_iteration_mode(child)
            if mode:
                return mode
    for attr in ("operands", "args", "items"):
        for child in getattr(expr, attr, []) or []:
            if isinstance(child, Expr):
                mode = _find_iteration_mode(child)
                if mode:
                    return mode
    for child in getattr(expr, "named", {}).values():
        mode = _find_iteration_mode(child)
        if mode:
            return mode
    return None


def _references(expr, name: str) -> bool:
    if isinstance(expr, VarRef) and expr.name == name:
        return True
    for attr in ("left", "right", "source", "predicate", "body", "base", "index"):
        child = getattr(expr, attr, None)
        if isinstance(child, Expr) and _references(child, name):
            return True
    for attr in ("operands", "args", "items"):
        if any(_references(c, name) for c in getattr(expr, attr, []) or []):
            return True
    return any(_references(c, name) for c in getattr(expr, "named", {}).values())


def extract_query_params(template) -> list[tuple[str, str | None]]:
    """Parameter references of a query template in textual order, duplicates kept."""
    return template.params()
