"""Physical plan execution.

Topological evaluation with write-once variable bindings, lazy virtual-node
resolution through the cost model, partitioned data-parallel kernels on a
process pool, and optional buffered chain streaming.
"""

from __future__ import annotations

import itertools
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .analytics import graphalgs, nlp
from .cost import CostModelStore, featurize_subplan
from .errors import ExecutionError, MissingCostModel, TriStoreError
from .logical import args_dict
from .physical import (CandidatePlans, Chain, PhysicalDAG, SubPlan,
                       choose_subplan, compute_regions, partition_chains)
from .runtime import EngineRef, OpRuntime
from .values import Corpus, Document, PartitionedValue, Relation


@dataclass
class ExecOptions:
    workers: int = 1
    buffer: bool = False
    batch_size: int = 1024
    use_cost_model: bool = True

    def __post_init__(self):
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass
class Decision:
    virtual_node: int
    pattern: str
    chosen: int
    label: str
    predicted_costs: list[float]


@dataclass
class RunLedger:
    node_times: list[dict] = field(default_factory=list)
    decisions: list[Decision] = field(default_factory=list)
    chain_events: list[tuple[str, int, int]] = field(default_factory=list)
    peak_live_rows: int = 0
    movement_ms: float = 0.0
    served_query_ms: float = 0.0

    def to_json_dict(self) -> dict:
        return {
            "nodes": self.node_times,
            "decisions": [
                {"virtual_node": d.virtual_node, "pattern": d.pattern,
                 "chosen_subplan": d.label,
                 "predicted_costs": d.predicted_costs}
                for d in self.decisions],
            "chain_events": [{"event": e, "node": n, "batch": b}
                             for e, n, b in self.chain_events],
            "peak_live_rows": self.peak_live_rows,
            "movement_ms": self.movement_ms,
            "served_query_ms": self.served_query_ms,
        }


@dataclass
class ExecResult:
    bindings: dict[str, object]
    ledger: RunLedger


def execute_plan(plans: CandidatePlans, rt: OpRuntime,
                 store: CostModelStore | None = None,
                 options: ExecOptions | None = None) -> ExecResult:
    return _Executor(plans, rt, store, options or ExecOptions()).run()


# --- partition worker entry points (top level: must be picklable) -----------------

def _kernel_partition(task):
    kind, payload, part = task
    if kind == "NLPPipeline@Native":
        value = part
        for stage, gaz in payload["stages"]:
            value = _apply_stage_payload(value, stage, gaz)
        return value
    if kind == "NLPAnnotator@Native":
        return _apply_stage_payload(part, payload["stage"], payload.get("gazetteer"))
    if kind == "FilterStopWords@Native":
        return nlp.filter_stopwords(part, payload["stopwords"])
    if kind == "CollectWNFromDocs@Native":
        return graphalgs.collect_word_neighbor_counts(
            part, payload["maxDistance"], payload["words"])
    if kind == "CollectGraphElementsFromRelation@Native":
        return part
    if kind in ("SumList@Native", "SumColumn@Native", "SumVector@Native"):
        return sum(part)
    if kind == "SumMatrix@Native":
        return sum(part)
    raise ExecutionError(f"operator {kind!r} is not partition-capable")


def _apply_stage_payload(corpus, stage, gazetteer):
    if stage == "ner":
        annotated = nlp.annotate(corpus, "ner", {"gazetteer": gazetteer})
        pairs = nlp.extract_entities(annotated)
        return Relation({"type": "String", "name": "String"}, pairs)
    return nlp.annotate(corpus, stage, {})


PR_KERNELS = {"NLPAnnotator@Native", "NLPPipeline@Native",
              "FilterStopWords@Native", "CollectWNFromDocs@Native",
              "CollectGraphElementsFromRelation@Native", "SumList@Native",
              "SumColumn@Native", "SumVector@Native", "SumMatrix@Native"}


# --- executor ------------------------------------------------------------------------

class _Executor:
    def __init__(self, plans: CandidatePlans, rt: OpRuntime,
                 store: CostModelStore | None, options: ExecOptions):
        self.plans = plans
        self.pg = plans.pg
        self.rt = rt
        self.store = store
        self.options = options
        self.ledger = RunLedger()
        self.regions = compute_regions(self.pg)
        self.memo: dict = {}
        self._gen = itertools.count()
        self._pool: ProcessPoolExecutor | None = None
        self._virtual_choice: dict[int, int] = {}
        self._chain_member: dict[int, list[int]] = {}

    # --- pool ---

    def pool(self) -> ProcessPoolExecutor | None:
        if self.options.workers <= 1:
            return None
        if self._pool is None:
            self._pool = ProcessPoolExecutor(max_workers=self.options.workers)
        return self._pool

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    # --- main loop ---

    def run(self) -> ExecResult:
        try:
            if self.options.buffer:
                self._plan_chains()
            bindings = {}
            for var, (nid, slot) in self.pg.outputs.items():
                bindings[var] = self._materialize(self.eval(nid, {})[slot])
            for sid in self.pg.stores:
                self.eval(sid, {})
            self._snapshot_latency()
            return ExecResult(bindings, self.ledger)
        finally:
            self.close()
            self.rt.polystore.drop_temps()

    def _snapshot_latency(self):
        led = self.rt.polystore.ledger
        self.ledger.movement_ms = led.movement_ms()
        self.ledger.served_query_ms = sum(
            e.simulated_ms for e in led.events if e.kind == "served_query")

    def _plan_chains(self):
        chains, _cuts = partition_chains(self.pg)
        for chain in chains:
            if len(chain.nodes) < 2:
                continue
            if any(self.regions.get(n) for n in chain.nodes):
                continue
            if not _chain_streamable(self.pg, chain):
                continue
            for nid in chain.nodes:
                self._chain_member[nid] = chain.nodes

    # --- recursive evaluation ---

    def eval(self, nid: int, scope: dict) -> list:
        node = self.pg.nodes[nid]
        if node.kind.startswith(("LambdaVar", "ElementRef")):
            binder = args_dict(node).get("binder")
            _tok, value = scope[binder]
            slot = args_dict(node).get("slot")
            if slot is not None and isinstance(value, tuple):
                return [value[slot]]
            return [value]

        deps = self.regions.get(nid, frozenset())
        key = (nid, tuple(sorted((b, scope[b][0]) for b in deps if b in scope)))
        if key in self.memo:
            return self.memo[key]

        start = time.perf_counter()
        if not scope and nid in self._chain_member \
                and self._chain_member[nid][-1] == nid:
            result = self._eval_chain(self._chain_member[nid], scope)
        else:
            result = self._eval_node(nid, scope)
        elapsed = (time.perf_counter() - start) * 1000.0
        self.ledger.node_times.append(
            {"node": nid, "kind": node.kind, "duration_ms": elapsed})
        self.memo[key] = result
        return result

    def _eval_node(self, nid: int, scope: dict) -> list:
        node = self.pg.nodes[nid]
        args = args_dict(node)
        try:
            if node.virtual:
                return self._eval_virtual(nid, scope)
            if node.kind == "Map@Coordinator":
                return [self._eval_map(nid, scope)]
            if node.kind == "Reduce@Coordinator":
                return [self._eval_reduce(nid, scope)]
            if node.kind == "Filter@Coordinator":
                return [self._eval_filter(nid, scope)]
            if node.kind == "Partition":
                return [self._eval_partition(nid, scope)]
            if node.kind == "Merge":
                return [merge_partitions(self._inputs(nid, scope)[0],
                                         args.get("mode", "concat"))]
            inputs = self._inputs(nid, scope)
            if node.kind in PR_KERNELS and inputs \
                    and isinstance(inputs[0], PartitionedValue):
                return [self._eval_parallel(node.kind, args, inputs)]
            value = self.rt.run_op(node.kind, args, inputs)
            spec = node.spec()
            return list(value) if spec.outputs > 1 else [value]
        except TriStoreError:
            raise
        except Exception as err:
            raise ExecutionError(f"{type(err).__name__}: {err}",
                                 node=f"{node.kind}#{nid}") from err

    def _inputs(self, nid: int, scope: dict) -> list:
        return [self.eval(e.src, scope)[e.src_slot] for e in self.pg.inputs(nid)]

    # --- virtual nodes ---

    def _eval_virtual(self, vid: int, scope: dict) -> list:
        subs = self.plans.pm[vid]
        ext_values = self._inputs(vid, scope)
        ext_values = [self._materialize(v) for v in ext_values]
        if vid in self._virtual_choice:
            choice = self._virtual_choice[vid]
        else:
            choice = self._decide(vid, subs, ext_values)
            self._virtual_choice[vid] = choice
        sub = subs[choice]
        return self._eval_subplan(sub, ext_values, scope)

    def _materialize(self, value):
        if isinstance(value, PartitionedValue):
            return merge_partitions(value, value.merge_mode)
        return value

    def _decide(self, vid: int, subs: list[SubPlan], ext_values: list) -> int:
        node = self.pg.nodes[vid]
        pattern = args_dict(node).get("pattern", "")
        if not self.options.use_cost_model:
            self.ledger.decisions.append(
                Decision(vid, pattern, 0, subs[0].label, []))
            return 0
        if self.store is None:
            raise MissingCostModel(
                f"virtual node {vid} reached without a cost-model store; "
                "run calibrate or pass --no-cost-model")
        costs = []
        for sub in subs:
            param_value = _subplan_param_value(sub, ext_values,
                                               self.rt, self.rt.polystore)
            feats = featurize_subplan(sub, ext_values, self.rt.polystore,
                                      param_value)
            costs.append(self.store.predict_subplan(feats))
        choice = choose_subplan(subs, costs)
        self.ledger.decisions.append(
            Decision(vid, pattern, choice, subs[choice].label, costs))
        return choice

    def _eval_subplan(self, sub: SubPlan, ext_values: list, scope: dict) -> list:
        values: dict[tuple[int, int], object] = {}
        for snid in sub.dag.topo_order():
            snode = sub.dag.nodes[snid]
            args = args_dict(snode)
            if snode.kind == "ExternalInput":
                values[(snid, 0)] = ext_values[args["index"]]
                continue
            inputs = [values[(e.src, e.src_slot)] for e in sub.dag.inputs(snid)]
            if snode.kind == "Partition":
                values[(snid, 0)] = self._partition_value(inputs[0])
                continue
            if snode.kind == "Merge":
                values[(snid, 0)] = merge_partitions(inputs[0],
                                                     args.get("mode", "concat"))
                continue
            if snode.kind in PR_KERNELS and inputs \
                    and isinstance(inputs[0], PartitionedValue):
                values[(snid, 0)] = self._eval_parallel(snode.kind, args, inputs)
                continue
            out = self.rt.run_op(snode.kind, args, inputs)
            if snode.spec().outputs > 1:
                for s, v in enumerate(out):
                    values[(snid, s)] = v
            else:
                values[(snid, 0)] = out
        return [values[(snid, slot)] for snid, slot in sub.out_slots]

    # --- higher-order coordinators ---

    def _eval_map(self, nid: int, scope: dict):
        source = self._materialize(self._inputs(nid, scope)[0])
        root = self.pg.body_root(nid)
        out = []
        for elem in _elements(source):
            inner = dict(scope)
            inner[nid] = (next(self._gen), elem)
            out.append(self.eval(root, inner)[0])
        return out

    def _eval_reduce(self, nid: int, scope: dict):
        source = self._materialize(self._inputs(nid, scope)[0])
        items = _elements(source)
        if not items:
            raise ExecutionError("reduce over an empty collection",
                                 node=f"Reduce#{nid}")
        root = self.pg.body_root(nid)
        acc = items[0]
        for item in items[1:]:
            inner = dict(scope)
            inner[nid] = (next(self._gen), (acc, item))
            acc = self.eval(root, inner)[0]
        return acc

    def _eval_filter(self, nid: int, scope: dict):
        from .analytics import collections_ops as cops
        from .values import Matrix
        node = self.pg.nodes[nid]
        mode = args_dict(node).get("mode")
        source = self._materialize(self._inputs(nid, scope)[0])
        root = self.pg.body_root(nid)

        def keep(element) -> bool:
            inner = dict(scope)
            inner[nid] = (next(self._gen), element)
            return bool(self.eval(root, inner)[0])

        if isinstance(source, Matrix):
            if mode == "Col":
                return cops.filter_matrix_cols(source, keep)
            return cops.filter_matrix_rows(source, keep)
        if isinstance(source, list):
            return [x for x in source if keep(x)]
        raise ExecutionError(f"cannot filter {type(source).__name__}",
                             node=f"Filter#{nid}")

    # --- partitioned execution ---

    def _eval_partition(self, nid: int, scope: dict):
        return self._partition_value(self._inputs(nid, scope)[0])

    def _partition_value(self, value) -> PartitionedValue:
        if isinstance(value, PartitionedValue):
            return value
        return partition_value(value, self.options.workers)

    def _eval_parallel(self, kind: str, args: dict, inputs: list):
        pv: PartitionedValue = inputs[0]
        payload = self._kernel_payload(kind, args, inputs)
        tasks = [(kind, payload, part) for part in pv.partitions]
        pool = self.pool()
        if pool is None or len(tasks) == 1:
            partials = [_kernel_partition(t) for t in tasks]
        else:
            try:
                partials = list(pool.map(_kernel_partition, tasks))
            except Exception as err:
                raise ExecutionError(
                    f"parallel execution failed: {err}", node=kind) from err
        spec_merge = _merge_mode_for(kind)
        return PartitionedValue(partials, pv.kind, spec_merge)

    def _kernel_payload(self, kind: str, args: dict, inputs: list) -> dict:
        if kind == "NLPPipeline@Native":
            stages = []
            for stage, stage_args in args.get("stages", ()):
                sargs = dict(stage_args)
                gaz = (self.rt.gazetteer(sargs["gazetteer"])
                       if stage == "ner" and sargs.get("gazetteer") else None)
                stages.append((stage, gaz))
            return {"stages": stages}
        if kind == "NLPAnnotator@Native":
            gaz = (self.rt.gazetteer(args["gazetteer"])
                   if args.get("stage") == "ner" and args.get("gazetteer") else None)
            return {"stage": args.get("stage"), "gazetteer": gaz}
        if kind == "FilterStopWords@Native":
            stop = self.rt.stopwords(args["stopwords"]) if args.get("stopwords") else []
            return {"stopwords": stop}
        if kind == "CollectWNFromDocs@Native":
            words = inputs[1] if len(inputs) > 1 else []
            return {"maxDistance": args.get("maxDistance", 5),
                    "words": list(self._materialize(words))}
        return {}

    # --- buffered chain execution ---

    def _eval_chain(self, chain_nodes: list[int], scope: dict) -> list:
        head = chain_nodes[0]
        head_inputs = self._inputs(head, scope)
        start = time.perf_counter()
        if head_inputs and isinstance(head_inputs[0], PartitionedValue):
            pv = head_inputs[0]
            parts = [self._stream_chain(chain_nodes, [part] + head_inputs[1:],
                                        scope, count_live=False)
                     for part in pv.partitions]
            merge = _merge_mode_for(self.pg.nodes[chain_nodes[-1]].kind)
            result = [PartitionedValue(parts, pv.kind, merge)]
        else:
            result = [self._stream_chain(chain_nodes, head_inputs, scope,
                                         count_live=True)]
        elapsed = (time.perf_counter() - start) * 1000.0
        for nid in chain_nodes[:-1]:
            self.ledger.node_times.append(
                {"node": nid, "kind": self.pg.nodes[nid].kind,
                 "duration_ms": elapsed, "chain": True})
        return result

    def _stream_chain(self, chain_nodes: list[int], head_inputs: list,
                      scope: dict, count_live: bool):
        """Pump batches through the chain one at a time; only the chain output
        is materialized."""
        head = chain_nodes[0]
        head_node = self.pg.nodes[head]
        stages = []
        for nid in chain_nodes:
            if nid == head and head_node.kind == "Range@Local":
                continue  # the head produces output batches directly
            others = (head_inputs[1:] if nid == head else
                      [self.eval(e.src, scope)[e.src_slot]
                       for e in self.pg.inputs(nid)[1:]])
            stages.append({"nid": nid, "node": self.pg.nodes[nid],
                           "others": others, "state": {}})
        tail = stages[-1] if stages else None
        tail_si = tail is not None and tail["node"].spec().buf == "SI"

        collected = []
        seq = 0
        for batch in self._head_batches(head_node, head_inputs):
            n_units = _batch_len(batch)
            if count_live:
                self.ledger.peak_live_rows = max(self.ledger.peak_live_rows,
                                                 n_units)
                self.ledger.chain_events.append(("emit", head, seq))
            value = batch
            for stage in stages:
                if stage is tail and tail_si:
                    self._consume_si(stage, value)
                else:
                    value = self.rt.run_op(stage["node"].kind,
                                           args_dict(stage["node"]),
                                           [value] + stage["others"])
            if count_live:
                self.ledger.chain_events.append(
                    ("consume", chain_nodes[-1], seq))
            if not tail_si:
                collected.append(value)
            seq += 1
        if tail_si:
            return self._finalize_si(tail)
        return _concat_batches(collected)

    def _head_batches(self, head_node, head_inputs):
        if head_node.kind == "Range@Local":
            lo, hi, step = (int(head_inputs[0]), int(head_inputs[1]),
                            int(head_inputs[2]))
            full = list(range(lo, hi, step))
            yield from _batch_split(full, self.options.batch_size)
            return
        yield from _batch_split(head_inputs[0], self.options.batch_size)

    def _consume_si(self, stage: dict, batch):
        kind = stage["node"].kind
        args = args_dict(stage["node"])
        state = stage["state"]
        if kind == "CollectWNFromDocs@Native":
            words = state.setdefault(
                "words",
                list(self._materialize(stage["others"][0]))
                if stage["others"] else [])
            partial = graphalgs.collect_word_neighbor_counts(
                batch, args.get("maxDistance", 5), words)
            acc = state.setdefault("counts", {})
            for key, cnt in partial.items():
                acc[key] = acc.get(key, 0) + cnt
        elif kind in ("SumList@Native", "SumColumn@Native", "SumVector@Native"):
            state["acc"] = state.get("acc", 0) + sum(batch)
        elif kind == "Relation2Engine":
            state.setdefault("rows", []).extend(batch.rows)
            state["schema"] = batch.schema
        else:
            state.setdefault("batches", []).append(batch)

    def _finalize_si(self, stage: dict):
        kind = stage["node"].kind
        args = args_dict(stage["node"])
        state = stage["state"]
        if kind == "CollectWNFromDocs@Native":
            return graphalgs.neighbor_counts_to_relation(state.get("counts", {}))
        if kind in ("SumList@Native", "SumColumn@Native", "SumVector@Native"):
            return state.get("acc", 0)
        if kind == "Relation2Engine":
            rel = Relation(state.get("schema", {}), state.get("rows", []))
            return self.rt.run_op(kind, args, [rel])
        whole = _concat_batches(state.get("batches", []))
        return self.rt.run_op(kind, args, [whole] + stage["others"])


# --- helpers ---------------------------------------------------------------------------

def partition_value(value, workers: int) -> PartitionedValue:
    items, kind = _split_source(value)
    n = len(items)
    workers = max(1, workers)
    base, extra = divmod(n, workers)
    parts = []
    start = 0
    for i in range(workers):
        size = base + (1 if i < extra else 0)
        parts.append(_rebuild(value, kind, items[start:start + size]))
        start += size
    return PartitionedValue(parts, kind)


def _split_source(value):
    if isinstance(value, Relation):
        return value.rows, "relation"
    if isinstance(value, Corpus):
        return value.docs, "corpus"
    if isinstance(value, list):
        return value, "list"
    raise ExecutionError(f"cannot partition {type(value).__name__}")


def _rebuild(value, kind, items):
    if kind == "relation":
        return Relation(value.schema, list(items))
    if kind == "corpus":
        return Corpus(list(items))
    return list(items)


def merge_partitions(value, mode: str = "concat"):
    if not isinstance(value, PartitionedValue):
        return value
    parts = value.partitions
    if mode == "sum_counts":
        merged = graphalgs.merge_neighbor_counts(
            [p if isinstance(p, dict) else p for p in parts])
        return graphalgs.neighbor_counts_to_relation(merged)
    if mode == "sum":
        return sum(parts)
    if mode == "entity_union":
        seen: dict = {}
        schema = None
        for p in parts:
            schema = p.schema
            for row in p.rows:
                seen.setdefault(row, None)
        return Relation(schema or {"type": "String", "name": "String"},
                        list(seen))
    return _concat_batches(parts)


def _concat_batches(parts: list):
    if not parts:
        return []
    first = parts[0]
    if isinstance(first, Relation):
        rows = [r for p in parts for r in p.rows]
        return Relation(first.schema, rows)
    if isinstance(first, Corpus):
        return Corpus([d for p in parts for d in p.docs])
    if isinstance(first, list):
        return [x for p in parts for x in p]
    if len(parts) == 1:
        return first
    raise ExecutionError(f"cannot concatenate {type(first).__name__}")


def _elements(source) -> list:
    if isinstance(source, list):
        return source
    if isinstance(source, Corpus):
        return list(source.docs)
    if isinstance(source, Relation):
        return list(source.rows)
    raise ExecutionError(f"cannot iterate over {type(source).__name__}")


def _batch_split(value, batch_size: int):
    items, kind = _split_source(value)
    for i in range(0, max(len(items), 1), batch_size):
        chunk = items[i:i + batch_size]
        if not chunk and i > 0:
            break
        yield _rebuild(value, kind, chunk)


def _batch_len(batch) -> int:
    if isinstance(batch, Relation):
        return len(batch.rows)
    if isinstance(batch, Corpus):
        return len(batch.docs)
    try:
        return len(batch)
    except TypeError:
        return 1


def _merge_mode_for(kind: str) -> str:
    from .physical import PHYS_REGISTRY
    spec = PHYS_REGISTRY.get(kind)
    return spec.merge if spec is not None else "concat"


def _chain_streamable(pg: PhysicalDAG, chain: Chain) -> bool:
    head = chain.nodes[0]
    if pg.nodes[head].spec().buf not in ("SO", "SS"):
        return False
    for i, nid in enumerate(chain.nodes):
        kind = pg.nodes[nid].kind
        spec = pg.nodes[nid].spec()
        is_tail = i == len(chain.nodes) - 1
        if spec.buf == "SI":
            if not (is_tail and kind in _SI_OK):
                return False
        elif kind not in _STREAM_OK:
            return False
    return True


_STREAM_OK = {"NLPAnnotator@Native", "NLPPipeline@Native",
              "FilterStopWords@Native", "GetColumns@Local", "ToList@Local",
              "CollectGraphElementsFromRelation@Native", "Range@Local"}
_SI_OK = {"CollectWNFromDocs@Native", "SumList@Native", "SumColumn@Native",
          "SumVector@Native", "Relation2Engine"}


def _subplan_param_value(sub: SubPlan, ext_values: list, rt, polystore):
    """Resolve $params of the sub-plan's query node to the virtual node's
    actual input values (tracing through movement operators)."""
    from .ast_nodes import Param

    exec_node = None
    for nid, node in sub.dag.nodes.items():
        if "params" in args_dict(node):
            exec_node = nid
            break
    if exec_node is None:
        return None
    args = args_dict(sub.dag.nodes[exec_node])
    offset = 1 if args.get("target_var") else 0
    slot_by_param = {tuple(p): offset + i
                     for i, p in enumerate(args.get("params", ()))}

    def trace_to_ext(nid: int):
        node = sub.dag.nodes[nid]
        if node.kind == "ExternalInput":
            return ext_values[args_dict(node)["index"]]
        ins = sub.dag.inputs(nid)
        if ins:
            return trace_to_ext(ins[0].src)
        return None

    def resolve(param: Param):
        slot = slot_by_param.get((param.var, param.member))
        if slot is None:
            return []
        edges = sub.dag.inputs(exec_node)
        for e in edges:
            if e.dst_slot == slot:
                return trace_to_ext(e.src)
        return []
    return resolve
