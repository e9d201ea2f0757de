"""Learned cost model: degree-2 polynomial regression per physical operator,
feature extraction from runtime inputs, and the calibration harness.

Model names carry the query family where it changes the feature schema
(e.g. ``ExecuteSQL@Served#type2``); movement and query operators against the
same embedded implementation share an ``@Embedded`` model regardless of which
local engine instance hosts them.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from .ast_nodes import parse_template
from .errors import (InsufficientSamples, MissingFeature, SingularDesign,
                     UnknownOperatorModel)
from .logical import args_dict
from .values import PropertyGraph, Relation

# --- model ---------------------------------------------------------------------

@dataclass
class OperatorCostModel:
    operator: str
    feature_names: list[str]
    weights: np.ndarray  # [w0, w_i..., w'_i..., w_(i,j) i<j...]
    rmse: float = 0.0
    sample_count: int = 0
    calibrated_at: str = ""

    def n_weights(self) -> int:
        n = len(self.feature_names)
        return 1 + 2 * n + n * (n - 1) // 2


def expand_degree2(features: np.ndarray) -> np.ndarray:
    """[1, f_i..., f_i^2..., f_i*f_j (i<j)...] for one sample or a batch."""
    single = features.ndim == 1
    f = np.atleast_2d(np.asarray(features, dtype=np.float64))
    n = f.shape[1]
    cols = [np.ones((f.shape[0], 1)), f, f ** 2]
    for i in range(n):
        for j in range(i + 1, n):
            cols.append((f[:, i] * f[:, j])[:, None])
    out = np.hstack(cols)
    return out[0] if single else out


@dataclass
class CalibrationSample:
    operator: str
    features: dict[str, float]
    time_ms: float
    dataset: str = ""

    def __post_init__(self):
        if self.time_ms < 0:
            raise ValueError("sample time must be non-negative")


def fit_model(samples: list[CalibrationSample]) -> OperatorCostModel:
    """Ordinary least squares on the degree-2 expansion of the raw features."""
    if not samples:
        raise InsufficientSamples("no calibration samples")
    operator = samples[0].operator
    names = list(samples[0].features)
    for s in samples:
        if s.operator != operator or list(s.features) != names:
            raise ValueError("samples mix operators or feature schemas")
    n = len(names)
    n_weights = 1 + 2 * n + n * (n - 1) // 2
    if len(samples) < n_weights:
        raise InsufficientSamples(
            f"{operator}: {len(samples)} samples for {n_weights} weights")
    X = expand_degree2(np.array([[s.features[k] for k in names] for s in samples])
                       if n else np.zeros((len(samples), 0)))
    y = np.array([s.time_ms for s in samples])
    weights, _res, rank, _sv = np.linalg.lstsq(X, y, rcond=None)
    if rank < n_weights:
        raise SingularDesign(operator, rank, n_weights)
    rmse = float(np.sqrt(np.mean((X @ weights - y) ** 2)))
    return OperatorCostModel(operator, names, weights, rmse, len(samples),
                             datetime.now(timezone.utc).isoformat(timespec="seconds"))


def predict_cost(model: OperatorCostModel, features: dict[str, float]) -> float:
    missing = [k for k in model.feature_names if k not in features]
    if missing:
        raise MissingFeature(f"{model.operator}: missing features {missing}")
    vec = np.array([features[k] for k in model.feature_names])
    return float(expand_degree2(vec) @ model.weights)


@dataclass
class CostModelStore:
    models: dict[str, OperatorCostModel] = field(default_factory=dict)

    def add(self, model: OperatorCostModel):
        self.models[model.operator] = model

    def predict(self, operator: str, features: dict[str, float]) -> float:
        if operator not in self.models:
            raise UnknownOperatorModel(f"no cost model for operator {operator!r}")
        return predict_cost(self.models[operator], features)

    def predict_subplan(self, op_features: list[tuple[str, dict[str, float]]]) -> float:
        """Sum of per-operator predictions, each clamped at zero."""
        return sum(max(0.0, self.predict(op, feats)) for op, feats in op_features)

    # --- persistence: versioned text format ---

    def dump(self) -> str:
        lines = ["tristore-cost-store v1"]
        for name in sorted(self.models):
            m = self.models[name]
            lines.append(f"[operator {name}]")
            lines.append("features " + " ".join(m.feature_names))
            lines.append("weights " + " ".join(repr(float(w)) for w in m.weights))
            lines.append(f"rmse {m.rmse!r}")
            lines.append(f"samples {m.sample_count}")
            lines.append(f"calibrated_at {m.calibrated_at}")
        return "\n".join(lines) + "\n"

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dump())

    @classmethod
    def load(cls, path) -> "CostModelStore":
        store = cls()
        with open(path, "r", encoding="utf-8") as fh:
            lines = [ln.rstrip("\n") for ln in fh]
        if not lines or not lines[0].startswith("tristore-cost-store"):
            raise UnknownOperatorModel(f"{path} is not a cost-model store")
        cur: dict | None = None

        def flush():
            if cur is not None:
                store.add(OperatorCostModel(
                    cur["name"], cur.get("features", []),
                    np.array(cur.get("weights", [])), cur.get("rmse", 0.0),
                    cur.get("samples", 0), cur.get("calibrated_at", "")))
        for ln in lines[1:]:
            if ln.startswith("[operator "):
                flush()
                cur = {"name": ln[len("[operator "):-1]}
            elif cur is not None and ln.strip():
                key, _, rest = ln.partition(" ")
                if key == "features":
                    cur["features"] = rest.split() if rest else []
                elif key == "weights":
                    cur["weights"] = [float(x) for x in rest.split()]
                elif key == "rmse":
                    cur["rmse"] = float(rest)
                elif key == "samples":
                    cur["samples"] = int(rest)
                elif key == "calibrated_at":
                    cur["calibrated_at"] = rest
        flush()
        return store


# --- featurization ----------------------------------------------------------------

def model_key(kind: str, args: dict, polystore, family: str | None = None) -> str:
    """Resolve a physical node to its cost-model name."""
    def locality(alias):
        return polystore.descriptor(alias).locality if alias else "embedded"

    if kind.startswith("ExecuteSQL"):
        if kind == "ExecuteSQL@Served":
            loc = locality(args.get("exec_engine") or args.get("engine"))
        elif kind in ("ExecuteSQL@Local", "ExecuteSQL@InMemory"):
            loc = "embedded"
        else:
            loc = locality(args.get("engine"))
        return f"ExecuteSQL@{'Served' if loc == 'served' else 'Embedded'}#{family}"
    if kind.startswith("ExecuteCypher"):
        loc = "embedded" if kind == "ExecuteCypher@Value" \
            else locality(args.get("engine"))
        return f"ExecuteCypher@{'Served' if loc == 'served' else 'Embedded'}#{family}"
    if kind == "Relation2Engine":
        loc = locality(args.get("dst"))
        return f"Relation2Engine@{'Served' if loc == 'served' else 'Embedded'}"
    if kind == "EngineTable2Local":
        loc = locality(args.get("src"))
        return f"EngineTable2Local@{'Served' if loc == 'served' else 'Embedded'}"
    if kind == "Graph2Engine":
        loc = locality(args.get("dst"))
        return f"Graph2Engine@{'Served' if loc == 'served' else 'Embedded'}"
    return kind


@dataclass
class _Stat:
    rows: float = 0.0
    nodes: float = 0.0
    edges: float = 0.0
    value: object = None


def _value_stat(value) -> _Stat:
    if isinstance(value, Relation):
        return _Stat(rows=len(value.rows), value=value)
    if isinstance(value, PropertyGraph):
        return _Stat(nodes=value.node_count, edges=value.edge_count, value=value)
    if isinstance(value, list):
        return _Stat(rows=len(value), value=value)
    return _Stat(value=value)


def _pair_relation_graph_stats(stat: _Stat) -> tuple[float, float]:
    """(node_count, edge_count) of the graph a pair relation would build."""
    rel = stat.value
    if isinstance(rel, Relation) and len(rel.columns) >= 2:
        keys = set()
        for row in rel.rows:
            keys.add(row[0])
            keys.add(row[1])
        return float(len(keys)), float(len(rel.rows))
    return stat.nodes, stat.edges


def featurize_subplan(sub, ext_values: list, polystore,
                      param_value=None) -> list[tuple[str, dict[str, float]]]:
    """(model name, raw features) for every chargeable operator of a sub-plan,
    computed from the virtual node's actual input values."""
    dag = sub.dag
    stats: dict[int, _Stat] = {}
    out: list[tuple[str, dict[str, float]]] = []
    for nid in dag.topo_order():
        node = dag.nodes[nid]
        args = args_dict(node)
        ins = [stats.get(e.src, _Stat()) for e in dag.inputs(nid)]
        if node.kind == "ExternalInput":
            stats[nid] = _value_stat(ext_values[args["index"]])
            continue
        name, feats, stat = _featurize_node(node.kind, args, ins, polystore,
                                            param_value)
        if name is not None:
            out.append((name, feats))
        stats[nid] = stat
    return out


def _featurize_node(kind: str, args: dict, ins: list[_Stat], polystore,
                    param_value) -> tuple[str | None, dict, _Stat]:
    if kind == "Relation2Engine":
        rows = ins[0].rows if ins else 0.0
        return (model_key(kind, args, polystore), {"row_count": rows},
                ins[0] if ins else _Stat())
    if kind == "EngineTable2Local":
        table = polystore.sql(args["src"]).table(args["table"])
        rows = float(len(table.rows))
        return (model_key(kind, args, polystore), {"row_count": rows},
                _Stat(rows=rows, value=table))
    if kind == "Graph2Engine":
        units = ins[0].nodes + ins[0].edges if ins else 0.0
        return (model_key(kind, args, polystore), {"element_count": units}, ins[0])
    if kind.startswith("ExecuteSQL"):
        return _featurize_sql(kind, args, polystore, param_value)
    if kind.startswith("ExecuteCypher"):
        return _featurize_cypher(kind, args, ins, polystore, param_value)
    if kind.startswith("CreateGraph"):
        nodes, edges = _pair_relation_graph_stats(ins[0]) if ins else (0.0, 0.0)
        return (kind, {"node_count": nodes, "edge_count": edges},
                _Stat(nodes=nodes, edges=edges))
    if kind.startswith(("PageRank", "Betweenness")):
        src = ins[0] if ins else _Stat()
        nodes, edges = (src.nodes, src.edges)
        if src.value is not None and isinstance(src.value, Relation):
            nodes, edges = _pair_relation_graph_stats(src)
        return (kind, {"node_count": nodes, "edge_count": edges}, _Stat())
    return None, {}, _Stat()


def _featurize_sql(kind, args, polystore, param_value):
    from .querylang import parse_sql
    sel = parse_sql(parse_template(args["template"]))
    family = sel.classify()
    name = model_key(kind, args, polystore, family)

    def table_rows(tref):
        if tref.param is not None:
            if param_value is None:
                raise MissingFeature(f"no value for parameter ${tref.param.var}")
            rel = param_value(tref.param)
            return float(len(rel.rows))
        src_alias = args.get("engine")
        return float(len(polystore.sql(src_alias).table(tref.name).rows))

    if family == "type2":
        rows = [table_rows(t) for t in sel.tables]
        feats = {"rows_r1": rows[0], "rows_r2": rows[1]}
    elif family == "type1":
        feats = {"row_count": table_rows(sel.tables[0]),
                 "in_list_size": _in_list_size(sel.where, param_value)}
    else:
        feats = {"row_count": table_rows(sel.tables[0])}
    return name, feats, _Stat()


def _in_list_size(pred, param_value) -> float:
    from .querylang import SqlBool, SqlCmp, SqlParam
    if isinstance(pred, SqlBool):
        return sum(_in_list_size(p, param_value) for p in pred.operands)
    if isinstance(pred, SqlCmp) and pred.op == "in":
        if isinstance(pred.right, SqlParam):
            if param_value is None:
                return 0.0
            return float(len(param_value(pred.right.param)))
        return float(len(pred.right))
    return 0.0


def _featurize_cypher(kind, args, ins, polystore, param_value):
    from .querylang import parse_cypher
    cq = parse_cypher(parse_template(args["template"]))
    family = cq.classify()
    name = model_key(kind, args, polystore, family)
    if args.get("target_var"):
        graph_stat = ins[0] if ins else _Stat()
        if isinstance(graph_stat.value, Relation):
            nodes, edges = _pair_relation_graph_stats(graph_stat)
        else:
            nodes, edges = graph_stat.nodes, graph_stat.edges
    else:
        g = polystore.graph(args["engine"]).graph
        nodes, edges = float(g.node_count), float(g.edge_count)
    if family == "type2":
        feats = {"node_count": nodes,
                 "contains_predicate_count": _contains_count(cq, param_value)}
    else:
        sizes = _cypher_list_sizes(cq, param_value)
        feats = {"edge_count": edges,
                 "in_list_size_1": sizes[0] if sizes else 0.0,
                 "in_list_size_2": sizes[1] if len(sizes) > 1 else 0.0}
    return name, feats, _Stat()


def _cypher_list_sizes(cq, param_value) -> list[float]:
    from .ast_nodes import Param
    from .querylang import CyBool, CyIn
    sizes = []

    def scan(p):
        if isinstance(p, CyBool):
            for q in p.operands:
                scan(q)
        elif isinstance(p, CyIn):
            if isinstance(p.right, Param):
                sizes.append(float(len(param_value(p.right))) if param_value else 0.0)
            else:
                sizes.append(float(len(p.right)))
    if cq.where is not None:
        scan(cq.where)
    return sizes


def _contains_count(cq, param_value) -> float:
    from .ast_nodes import Param
    from .querylang import CyBool, CyContains, CyDynamic
    count = 0.0

    def scan(p):
        nonlocal count
        if isinstance(p, CyBool):
            for q in p.operands:
                scan(q)
        elif isinstance(p, CyContains):
            count += 1
        elif isinstance(p, CyDynamic) and param_value is not None:
            text = str(param_value(p.param))
            count += float(text.lower().count("contains"))
    if cq.where is not None:
        scan(cq.where)
    return count
