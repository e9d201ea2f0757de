"""Embedded unistore backends and the polystore runtime."""

from .graph import GraphEngine, execute_cypher
from .polystore import (GRAPH_DB, LOCAL_SQL, SCRATCH_SQL, LatencyLedger,
                        Polystore)
from .relational import RelationalEngine, execute_select
from .text import TextEngine

__all__ = ["GRAPH_DB", "GraphEngine", "LOCAL_SQL", "LatencyLedger",
           "Polystore", "RelationalEngine", "SCRATCH_SQL", "TextEngine",
           "execute_cypher", "execute_select"]
