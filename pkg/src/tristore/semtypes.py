"""Semantic types of the dataflow language and per-variable metadata."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional


@dataclass(frozen=True)
class SemanticType:
    """Tagged union over the language's data types.

    `kind` is one of: Integer, Double, String, Boolean, Relation, Record,
    PropertyGraph, GraphElement, Corpus, Document, Matrix, List, Tuple, Map.
    List carries `elem`; Tuple carries `elems`; Map carries `key`/`value`.
    """

    kind: str
    elem: Optional["SemanticType"] = None
    elems: tuple["SemanticType", ...] = ()
    key: Optional["SemanticType"] = None
    value: Optional["SemanticType"] = None

    def __str__(self) -> str:
        if self.kind == "List":
            return f"List({self.elem})"
        if self.kind == "Tuple":
            return f"Tuple({', '.join(map(str, self.elems))})"
        if self.kind == "Map":
            return f"Map({self.key}, {self.value})"
        return self.kind

    @property
    def is_collection(self) -> bool:
        return self.kind in ("List", "Relation", "Corpus", "Matrix", "Tuple")

    @property
    def is_primitive(self) -> bool:
        return self.kind in ("Integer", "Double", "String", "Boolean")


INTEGER = SemanticType("Integer")
DOUBLE = SemanticType("Double")
STRING = SemanticType("String")
BOOLEAN = SemanticType("Boolean")
RELATION = SemanticType("Relation")
RECORD = SemanticType("Record")
GRAPH = SemanticType("PropertyGraph")
GRAPH_ELEMENT = SemanticType("GraphElement")
CORPUS = SemanticType("Corpus")
DOCUMENT = SemanticType("Document")
MATRIX = SemanticType("Matrix")


def list_of(elem: SemanticType) -> SemanticType:
    return SemanticType("List", elem=elem)


def tuple_of(*elems: SemanticType) -> SemanticType:
    return SemanticType("Tuple", elems=tuple(elems))


def assignable(expected: SemanticType, found: SemanticType) -> bool:
    """Exact match, with the single implicit coercion Integer -> Double."""
    if expected == found:
        return True
    if expected == DOUBLE and found == INTEGER:
        return True
    if expected.kind == "List" and found.kind == "List":
        return assignable(expected.elem, found.elem)
    return False


@dataclass
class GraphMeta:
    node_labels: set[str] = field(default_factory=set)
    node_props: dict[str, str] = field(default_factory=dict)
    edge_labels: set[str] = field(default_factory=set)
    edge_props: dict[str, str] = field(default_factory=dict)
    key_prop: Optional[str] = None


@dataclass
class MatrixMeta:
    row_count: Optional[int] = None
    col_count: Optional[int] = None
    element_type: SemanticType = DOUBLE
    has_row_map: bool = False
    has_col_map: bool = False


@dataclass
class CollectionMeta:
    element_meta: Optional["VarMeta"] = None
    size: Optional[int] = None


@dataclass
class VarMeta:
    """Inferred type plus the metadata block matching that type."""

    type: SemanticType
    relation_schema: Optional[dict[str, str]] = None
    graph_meta: Optional[GraphMeta] = None
    collection_meta: Optional[CollectionMeta] = None
    matrix_meta: Optional[MatrixMeta] = None
    origin_engine: Optional[str] = None
    # retrieval fields of corpus-typed query results
    fields: Optional[dict[str, str]] = None
    # key-map element types for matrices with semantic maps
    row_key_type: Optional[SemanticType] = None
    col_key_type: Optional[SemanticType] = None
    # statically-known value for integer constants (feeds e.g. lda topic count)
    static_value: Optional[int] = None

    def __post_init__(self):
        blocks = {
            "Relation": self.relation_schema is not None,
            "PropertyGraph": self.graph_meta is not None,
            "Matrix": self.matrix_meta is not None,
        }
        for kind, present in blocks.items():
            if present and self.type.kind != kind and self.type.kind != "List":
                raise ValueError(
                    f"metadata block for {kind} attached to {self.type.kind} variable")

    def element(self) -> "VarMeta":
        """Metadata of one element of a collection-typed variable."""
        if self.collection_meta is not None and self.collection_meta.element_meta is not None:
            return self.collection_meta.element_meta
        if self.type.kind == "List":
            return VarMeta(self.type.elem)
        if self.type.kind == "Relation":
            return VarMeta(RECORD)
        if self.type.kind == "Corpus":
            return VarMeta(DOCUMENT)
        raise ValueError(f"{self.type} has no element metadata")


def meta_of_primitive(t: SemanticType) -> VarMeta:
    return VarMeta(t)
