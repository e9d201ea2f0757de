"""Runtime value types for the dataflow language.

Values are treated as immutable once bound to a variable; nothing here
enforces copy-on-write, the executor simply never mutates an input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Optional

import numpy as np

from .errors import SchemaMismatch

PRIMITIVES = ("Integer", "Double", "String", "Boolean")

_PY_TYPES = {"Integer": int, "Double": float, "String": str, "Boolean": bool}


def coerce_primitive(value: Any, type_name: str) -> Any:
    """Coerce a raw (e.g. CSV) cell into the declared primitive type."""
    if type_name == "Integer":
        return int(value)
    if type_name == "Double":
        return float(value)
    if type_name == "Boolean":
        if isinstance(value, bool):
            return value
        return str(value).strip().lower() in ("true", "1", "t", "yes")
    return str(value)


def primitive_of(value: Any) -> str:
    if isinstance(value, bool):
        return "Boolean"
    if isinstance(value, int):
        return "Integer"
    if isinstance(value, float):
        return "Double"
    if isinstance(value, str):
        return "String"
    raise TypeError(f"not a primitive value: {value!r}")


@dataclass
class Relation:
    """A relational table: an ordered schema plus a list of row tuples."""

    schema: dict[str, str]  # column -> primitive type, insertion-ordered
    rows: list[tuple]

    def __post_init__(self):
        arity = len(self.schema)
        for r in self.rows:
            if len(r) != arity:
                raise SchemaMismatch(
                    f"row arity {len(r)} does not match schema arity {arity}")

    @property
    def columns(self) -> list[str]:
        return list(self.schema)

    def column(self, name: str) -> list:
        idx = self.columns.index(name)
        return [r[idx] for r in self.rows]

    def __len__(self) -> int:
        return len(self.rows)

    def sorted_rows(self) -> list[tuple]:
        return sorted(self.rows, key=lambda r: tuple(_sort_key(v) for v in r))


def _sort_key(v):
    if v is None:
        return (0, "")
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return (1, float(v))
    return (2, str(v))


@dataclass
class GraphNode:
    label: str
    props: dict[str, Any]


@dataclass
class GraphEdge:
    src: int
    dst: int
    label: str
    props: dict[str, Any]


@dataclass
class PropertyGraph:
    """Directed property graph; node/edge ids are small integers."""

    nodes: dict[int, GraphNode] = field(default_factory=dict)
    edges: dict[int, GraphEdge] = field(default_factory=dict)
    # property used to present a node in analytics output (e.g. "value")
    key_prop: Optional[str] = None

    def add_node(self, label: str, props: dict[str, Any]) -> int:
        nid = len(self.nodes)
        self.nodes[nid] = GraphNode(label, props)
        return nid

    def add_edge(self, src: int, dst: int, label: str, props: dict[str, Any]) -> int:
        if src not in self.nodes or dst not in self.nodes:
            raise SchemaMismatch("edge endpoint does not exist")
        eid = len(self.edges)
        self.edges[eid] = GraphEdge(src, dst, label, props)
        return eid

    def node_key(self, nid: int) -> Any:
        node = self.nodes[nid]
        if self.key_prop and self.key_prop in node.props:
            return node.props[self.key_prop]
        return nid

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    @property
    def edge_count(self) -> int:
        return len(self.edges)


@dataclass
class Document:
    doc_id: int
    content: str
    tokens: Optional[list[str]] = None
    # annotation arrays, aligned with tokens when present
    sentences: Optional[list[tuple[int, int]]] = None
    pos: Optional[list[str]] = None
    lemmas: Optional[list[str]] = None
    ner: Optional[list[str]] = None
    entities: Optional[list[tuple[str, str]]] = None
    fields: Optional[dict[str, str]] = None  # retrieval fields beyond content


@dataclass
class Corpus:
    docs: list[Document]

    def __post_init__(self):
        ids = [d.doc_id for d in self.docs]
        if len(set(ids)) != len(ids):
            raise SchemaMismatch("duplicate doc_id in corpus")

    def __len__(self) -> int:
        return len(self.docs)

    def __iter__(self):
        return iter(self.docs)


@dataclass
class Matrix:
    """Dense float matrix with optional semantic row/column key maps."""

    values: np.ndarray
    row_keys: Optional[list] = None
    col_keys: Optional[list] = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise SchemaMismatch("matrix values must be 2-D")
        if self.row_keys is not None and len(self.row_keys) != self.values.shape[0]:
            raise SchemaMismatch("row key count does not match row count")
        if self.col_keys is not None and len(self.col_keys) != self.values.shape[1]:
            raise SchemaMismatch("column key count does not match column count")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass
class PartitionedValue:
    """Contiguous partitions of a collection value, mergeable in index order."""

    partitions: list
    kind: str            # "relation" | "corpus" | "list"
    merge_mode: str = "concat"   # "concat" | "sum_counts"


def value_kind(v: Any) -> str:
    if isinstance(v, Relation):
        return "Relation"
    if isinstance(v, PropertyGraph):
        return "PropertyGraph"
    if isinstance(v, Corpus):
        return "Corpus"
    if isinstance(v, Matrix):
        return "Matrix"
    if isinstance(v, PartitionedValue):
        return "Partitioned"
    if isinstance(v, list):
        return "List"
    if isinstance(v, tuple):
        return "Tuple"
    if isinstance(v, bool):
        return "Boolean"
    if isinstance(v, int):
        return "Integer"
    if isinstance(v, float):
        return "Double"
    if isinstance(v, str):
        return "String"
    return type(v).__name__


def values_equal(a: Any, b: Any, rel_tol: float = 1e-9, abs_tol: float = 1e-12,
                 ordered_rows: bool = False) -> bool:
    """Deep structural equality with float tolerance.

    Relations compare as multisets of rows unless `ordered_rows`; matrices
    compare elementwise with their key maps; everything else recursively.
    """
    if isinstance(a, Relation) and isinstance(b, Relation):
        if a.schema != b.schema or len(a.rows) != len(b.rows):
            return False
        ra = a.rows if ordered_rows else a.sorted_rows()
        rb = b.rows if ordered_rows else b.sorted_rows()
        return all(values_equal(x, y, rel_tol, abs_tol) for x, y in zip(ra, rb))
    if isinstance(a, Matrix) and isinstance(b, Matrix):
        if a.shape != b.shape or a.row_keys != b.row_keys or a.col_keys != b.col_keys:
            return False
        return bool(np.allclose(a.values, b.values, rtol=rel_tol, atol=abs_tol))
    if isinstance(a, Corpus) and isinstance(b, Corpus):
        if len(a.docs) != len(b.docs):
            return False
        return all(x.doc_id == y.doc_id and x.content == y.content and x.tokens == y.tokens
                   for x, y in zip(a.docs, b.docs))
    if isinstance(a, PropertyGraph) and isinstance(b, PropertyGraph):
        return _graph_signature(a) == _graph_signature(b)
    if isinstance(a, (list, tuple)) and isinstance(b, (list, tuple)):
        if len(a) != len(b) or isinstance(a, tuple) != isinstance(b, tuple):
            return False
        return all(values_equal(x, y, rel_tol, abs_tol, ordered_rows) for x, y in zip(a, b))
    if isinstance(a, float) or isinstance(b, float):
        if not isinstance(a, (int, float)) or not isinstance(b, (int, float)):
            return False
        return math.isclose(float(a), float(b), rel_tol=rel_tol, abs_tol=abs_tol)
    return a == b


def _graph_signature(g: PropertyGraph):
    nodes = sorted((n.label, tuple(sorted(n.props.items()))) for n in g.nodes.values())
    def nsig(nid):
        n = g.nodes[nid]
        return (n.label, tuple(sorted(n.props.items())))
    edges = sorted((nsig(e.src), nsig(e.dst), e.label, tuple(sorted(e.props.items())))
                   for e in g.edges.values())
    return (nodes, edges)
