"""End-to-end pipeline: parse, validate, plan, and execute a script."""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field

from .catalog import SystemCatalog, load_catalog
from .cost import CostModelStore
from .engines.polystore import Polystore
from .executor import ExecOptions, ExecResult, execute_plan
from .interp import InterpResult, interpret
from .logical import LogicalDAG, build_logical_plan, optimize_logical
from .parser import parse_source
from .physical import CandidatePlans, add_data_parallelism, generate_candidates
from .runtime import OpRuntime
from .semantics import TypedScript, validate_and_infer

STAGES = ("parsing", "validating", "logical planning", "physical planning",
          "executing")


@dataclass
class CompiledScript:
    typed: TypedScript
    raw_plan: LogicalDAG
    optimized: LogicalDAG
    candidates: CandidatePlans
    stage_ms: dict[str, float] = field(default_factory=dict)


def compile_script(source: str, cat: SystemCatalog) -> CompiledScript:
    stage_ms: dict[str, float] = {}
    t0 = time.perf_counter()
    script = parse_source(source)
    stage_ms["parsing"] = (time.perf_counter() - t0) * 1000

    t0 = time.perf_counter()
    typed = validate_and_infer(script, cat)
    stage_ms["validating"] = (time.perf_counter() - t0) * 1000

    t0 = time.perf_counter()
    raw = build_logical_plan(typed)
    optimized = optimize_logical(raw)
    stage_ms["logical planning"] = (time.perf_counter() - t0) * 1000

    t0 = time.perf_counter()
    candidates = add_data_parallelism(generate_candidates(optimized))
    stage_ms["physical planning"] = (time.perf_counter() - t0) * 1000
    return CompiledScript(typed, raw, optimized, candidates, stage_ms)


def compile_file(script_path: str, catalog_path: str) -> CompiledScript:
    with open(script_path, "r", encoding="utf-8") as fh:
        source = fh.read()
    return compile_script(source, load_catalog(catalog_path))


def make_runtime(cat: SystemCatalog, base_dir: str, out_dir: str | None = None,
                 seed: int = 7) -> OpRuntime:
    poly = Polystore(cat, base_dir)
    return OpRuntime(poly, resource_dir=base_dir, out_dir=out_dir or base_dir,
                     seed=seed)


def run_compiled(compiled: CompiledScript, rt: OpRuntime,
                 store: CostModelStore | None = None,
                 options: ExecOptions | None = None) -> ExecResult:
    t0 = time.perf_counter()
    result = execute_plan(compiled.candidates, rt, store, options)
    compiled.stage_ms["executing"] = (time.perf_counter() - t0) * 1000
    return result


def run_reference(compiled: CompiledScript, rt: OpRuntime,
                  optimized: bool = False) -> InterpResult:
    plan = compiled.optimized if optimized else compiled.raw_plan
    return interpret(plan, rt)
