"""Polystore runtime: engine instances built from the catalog, bulk loading,
data movement, and the simulated served-locality latency ledger.

Served locality is modelled by *accounting* fixed + per-unit latencies on
every query and movement touching a served instance.  Charges are recorded
in the run ledger (and added to operator timings by the cost calibrator)
rather than slept, which keeps the accounting exact and calibration fast.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field
from typing import Optional

from ..catalog import EngineDescriptor, SystemCatalog
from ..errors import EngineUnavailable, IncompatibleModel, UnknownAlias
from ..values import (Corpus, Document, PropertyGraph, Relation, coerce_primitive)
from .graph import GraphEngine
from .relational import RelationalEngine
from .text import TextEngine

LOCAL_SQL = "__local__"      # local full-copy relational engine (embedded)
SCRATCH_SQL = "__scratch__"  # in-memory scratch relational engine (embedded)
GRAPH_DB = "__graphdb__"     # index-building graph store for engine-variant plans


@dataclass
class LatencyEvent:
    kind: str        # movement | served_query
    engine: str
    units: int
    simulated_ms: float


@dataclass
class LatencyLedger:
    events: list[LatencyEvent] = field(default_factory=list)

    def charge(self, desc: EngineDescriptor, kind: str, units: int) -> float:
        if desc.locality != "served":
            return 0.0
        ms = desc.served_fixed_latency_ms + desc.served_per_row_latency_us * units / 1000.0
        self.events.append(LatencyEvent(kind, desc.alias, units, ms))
        return ms

    def total_ms(self) -> float:
        return sum(e.simulated_ms for e in self.events)

    def movement_ms(self) -> float:
        return sum(e.simulated_ms for e in self.events if e.kind == "movement")


_EMBEDDED = EngineDescriptor(alias="(embedded)", model="relational", locality="embedded")


class Polystore:
    """All engine instances for one catalog, plus the implicit local engines."""

    def __init__(self, cat: SystemCatalog, base_dir: str = "."):
        self.catalog = cat
        self.base_dir = base_dir
        self.ledger = LatencyLedger()
        self.relational: dict[str, RelationalEngine] = {}
        self.graphs: dict[str, GraphEngine] = {}
        self.texts: dict[str, TextEngine] = {}
        self._temp_seq = 0
        for alias, desc in cat.instances.items():
            self._init_instance(alias, desc)
        self.relational[LOCAL_SQL] = RelationalEngine(LOCAL_SQL)
        self.relational[SCRATCH_SQL] = RelationalEngine(SCRATCH_SQL)
        self.graphs[GRAPH_DB] = GraphEngine(GRAPH_DB)

    # --- construction ---

    def _init_instance(self, alias: str, desc: EngineDescriptor):
        if desc.model == "relational":
            eng = RelationalEngine(alias)
            for entry in desc.entries("table"):
                rows = (_load_csv(self._path(entry.load_path), entry.columns)
                        if entry.load_path else [])
                eng.register(entry.name, Relation(dict(entry.columns), rows))
            self.relational[alias] = eng
        elif desc.model == "graph":
            eng = GraphEngine(alias)
            if desc.nodes_path:
                eng.set_graph(_load_graph(self._path(desc.nodes_path),
                                          self._path(desc.edges_path), desc))
            self.graphs[alias] = eng
        elif desc.model == "text":
            fields = [c for entry in desc.entries("field") for c in entry.columns]
            eng = TextEngine(alias, fields)
            for entry in desc.entries("field"):
                if entry.load_path:
                    for doc_id, doc_fields in _load_jsonl(self._path(entry.load_path)):
                        eng.add_document(doc_id, doc_fields)
            self.texts[alias] = eng

    def _path(self, p: Optional[str]) -> str:
        if p is None:
            raise EngineUnavailable("missing data path in catalog")
        return p if os.path.isabs(p) else os.path.join(self.base_dir, p)

    # --- lookups ---

    def descriptor(self, alias: str) -> EngineDescriptor:
        if alias in (LOCAL_SQL, SCRATCH_SQL, GRAPH_DB):
            return _EMBEDDED
        return self.catalog.lookup_engine(alias)

    def sql(self, alias: str) -> RelationalEngine:
        if alias not in self.relational:
            raise UnknownAlias(f"no relational engine {alias!r}")
        return self.relational[alias]

    def graph(self, alias: str) -> GraphEngine:
        if alias not in self.graphs:
            raise UnknownAlias(f"no graph engine {alias!r}")
        return self.graphs[alias]

    def text(self, alias: str) -> TextEngine:
        if alias not in self.texts:
            raise UnknownAlias(f"no text engine {alias!r}")
        return self.texts[alias]

    # --- movement ---

    def fresh_temp(self) -> str:
        self._temp_seq += 1
        return f"__temp_{self._temp_seq}"

    def move_relation(self, rel: Relation, dst_alias: str,
                      columns: Optional[list[str]] = None) -> str:
        """Register a relation under a fresh temp name at dst; returns the name."""
        eng = self.sql(dst_alias)
        if columns is not None:
            keep = [c for c in rel.columns if c in columns]
            idxs = [rel.columns.index(c) for c in keep]
            rel = Relation({c: rel.schema[c] for c in keep},
                           [tuple(row[i] for i in idxs) for row in rel.rows])
        name = self.fresh_temp()
        eng.register(name, rel, temp=True)
        self.ledger.charge(self.descriptor(dst_alias), "movement", len(rel.rows))
        return name

    def pull_table(self, src_alias: str, table: str,
                   columns: Optional[list[str]] = None) -> Relation:
        """Copy an engine table out to the local process, optionally projected."""
        rel = self.sql(src_alias).table(table)
        if columns is not None:
            keep = [c for c in rel.columns if c in columns]
            idxs = [rel.columns.index(c) for c in keep]
            rel = Relation({c: rel.schema[c] for c in keep},
                           [tuple(row[i] for i in idxs) for row in rel.rows])
        self.ledger.charge(self.descriptor(src_alias), "movement", len(rel.rows))
        return rel

    def move_graph(self, graph: PropertyGraph, dst_alias: str) -> GraphEngine:
        eng = self.graph(dst_alias)
        eng.set_graph(graph)
        self.ledger.charge(self.descriptor(dst_alias), "movement",
                           graph.node_count + graph.edge_count)
        return eng

    def move_value(self, value, dst_alias: str):
        """Generic movement entry point; checks model compatibility."""
        desc = self.descriptor(dst_alias)
        if isinstance(value, Relation):
            if desc.model != "relational":
                raise IncompatibleModel(f"cannot move a relation into {desc.model} engine")
            return self.move_relation(value, dst_alias)
        if isinstance(value, PropertyGraph):
            if desc.model != "graph":
                raise IncompatibleModel(f"cannot move a graph into {desc.model} engine")
            return self.move_graph(value, dst_alias)
        raise IncompatibleModel(f"cannot move value of type {type(value).__name__}")

    def charge_query(self, alias: str, shipped_units: int, result_rows: int) -> float:
        """Served-query latency: fixed + per-row on shipped inputs and results."""
        return self.ledger.charge(self.descriptor(alias), "served_query",
                                  shipped_units + result_rows)

    def drop_temps(self):
        for eng in self.relational.values():
            eng.drop_temps()


# --- bulk load formats -------------------------------------------------------

def _load_csv(path: str, schema: dict[str, str]) -> list[tuple]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return []
        missing = [c for c in schema if c not in header]
        if missing:
            raise EngineUnavailable(f"{path}: missing columns {missing}")
        idxs = [header.index(c) for c in schema]
        types = list(schema.values())
        return [tuple(coerce_primitive(row[i], t) for i, t in zip(idxs, types))
                for row in reader]


def _load_jsonl(path: str):
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            doc_id = int(obj.pop("id"))
            out.append((doc_id, {k: str(v) for k, v in obj.items()}))
    return out


def _load_graph(nodes_path: str, edges_path: str, desc: EngineDescriptor) -> PropertyGraph:
    prop_types: dict[str, dict[str, str]] = {}
    for entry in desc.schema_entries:
        prop_types[entry.name] = dict(entry.columns)

    graph = PropertyGraph()
    id_map: dict[str, int] = {}
    with open(nodes_path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        id_col, label_col = header.index(":ID"), header.index(":LABEL")
        prop_cols = [(i, h) for i, h in enumerate(header) if not h.startswith(":")]
        for row in reader:
            label = row[label_col]
            types = prop_types.get(label, {})
            props = {h: coerce_primitive(row[i], types.get(h, "String"))
                     for i, h in prop_cols if row[i] != ""}
            id_map[row[id_col]] = graph.add_node(label, props)
    with open(edges_path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        s_col, e_col, t_col = (header.index(":START_ID"), header.index(":END_ID"),
                               header.index(":TYPE"))
        prop_cols = [(i, h) for i, h in enumerate(header) if not h.startswith(":")]
        for row in reader:
            label = row[t_col]
            types = prop_types.get(label, {})
            props = {h: coerce_primitive(row[i], types.get(h, "String"))
                     for i, h in prop_cols if row[i] != ""}
            graph.add_edge(id_map[row[s_col]], id_map[row[e_col]], label, props)
    return graph
