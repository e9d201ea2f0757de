"""Tokenizer for the dataflow language.

Identifiers may contain interior hyphens (``text-field``); the language has
no arithmetic operators, so this never collides with subtraction.  String
literals support single, double, and triple-double quoting; ``/* */`` and
``//`` comments are skipped.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import IllegalCharacter, Span, UnterminatedString

KEYWORDS = {"use", "create", "analysis", "as", "map", "reduce", "where",
            "store", "and", "or", "not", "true", "false"}

QUERY_KEYWORDS = {"executesql": "sql", "executecypher": "cypher",
                  "executesolr": "solr"}

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*(?:-[A-Za-z][A-Za-z0-9_]*)*")
_NUM_RE = re.compile(r"\d+(\.\d+)?([eE][+-]?\d+)?")

_PUNCT = [
    (":=", "ASSIGN"), ("=>", "FATARROW"), ("->", "ARROW"), ("==", "EQEQ"),
    ("(", "LPAREN"), (")", "RPAREN"), ("[", "LBRACKET"), ("]", "RBRACKET"),
    ("{", "LBRACE"), ("}", "RBRACE"), ("<", "LT"), (">", "GT"), ("=", "EQ"),
    (",", "COMMA"), (";", "SEMI"), (".", "DOT"), (":", "COLON"), ("$", "DOLLAR"),
    ("-", "MINUS"),
]


@dataclass
class Token:
    kind: str    # IDENT, KEYWORD, INT, DOUBLE, STRING, or a punct kind
    text: str
    value: object
    span: Span

    def __repr__(self):
        return f"Token({self.kind}, {self.text!r})"


def tokenize_source(text: str) -> list[Token]:
    tokens: list[Token] = []
    pos, line, line_start = 0, 1, 0
    n = len(text)

    def span(start, end, sline, scol):
        return Span(start, end, sline, scol)

    while pos < n:
        ch = text[pos]
        if ch in " \t\r":
            pos += 1
            continue
        if ch == "\n":
            pos += 1
            line += 1
            line_start = pos
            continue
        col = pos - line_start + 1
        if text.startswith("//", pos):
            nl = text.find("\n", pos)
            pos = n if nl < 0 else nl
            continue
        if text.startswith("/*", pos):
            end = text.find("*/", pos + 2)
            if end < 0:
                raise IllegalCharacter("unterminated comment", line, col)
            line += text.count("\n", pos, end)
            if "\n" in text[pos:end]:
                line_start = text.rfind("\n", pos, end) + 1
            pos = end + 2
            continue
        if text.startswith('"""', pos):
            end = text.find('"""', pos + 3)
            if end < 0:
                raise UnterminatedString("unterminated triple-quoted string", line, col)
            raw = text[pos + 3:end]
            tokens.append(Token("STRING", text[pos:end + 3], raw,
                                span(pos, end + 3, line, col)))
            line += raw.count("\n")
            if "\n" in raw:
                line_start = text.rfind("\n", pos, end) + 1
            pos = end + 3
            continue
        if ch in "\"'":
            end = pos + 1
            buf = []
            while end < n and text[end] != ch:
                if text[end] == "\n":
                    raise UnterminatedString("unterminated string", line, col)
                if text[end] == "\\" and end + 1 < n:
                    buf.append(text[end + 1])
                    end += 2
                    continue
                buf.append(text[end])
                end += 1
            if end >= n:
                raise UnterminatedString("unterminated string", line, col)
            tokens.append(Token("STRING", text[pos:end + 1], "".join(buf),
                                span(pos, end + 1, line, col)))
            pos = end + 1
            continue
        m = _NUM_RE.match(text, pos)
        if m and ch.isdigit():
            lit = m.group()
            if "." in lit or "e" in lit or "E" in lit:
                tokens.append(Token("DOUBLE", lit, float(lit),
                                    span(pos, m.end(), line, col)))
            else:
                tokens.append(Token("INT", lit, int(lit),
                                    span(pos, m.end(), line, col)))
            pos = m.end()
            continue
        m = _IDENT_RE.match(text, pos)
        if m:
            word = m.group()
            kind = "KEYWORD" if word.lower() in KEYWORDS else "IDENT"
            value: object = word
            if kind == "KEYWORD" and word.lower() in ("true", "false"):
                kind, value = "BOOL", word.lower() == "true"
            tokens.append(Token(kind, word, value, span(pos, m.end(), line, col)))
            pos = m.end()
            continue
        for punct, kind in _PUNCT:
            if text.startswith(punct, pos):
                tokens.append(Token(kind, punct, punct,
                                    span(pos, pos + len(punct), line, col)))
                pos += len(punct)
                break
        else:
            raise IllegalCharacter(f"illegal character {ch!r}", line, col)
    tokens.append(Token("EOF", "", None, span(n, n, line, n - line_start + 1)))
    return tokens
