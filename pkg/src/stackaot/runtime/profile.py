"""Cycle attribution for simulator runs.

Execution counts are kept per code address, so any run (traced or not) can
be folded back onto bytecode instructions through the image's source map.
Per-iteration figures need a trace.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..compiler.image import CodeImage
from ..isa import CATEGORIES, category, cycle_cost
from .machine import RunResult


@dataclass
class BytecodeRow:
    bc: int
    cycles: int = 0
    executed: int = 0                       # native instructions executed
    by_category: dict = field(default_factory=lambda: {c: 0 for c in CATEGORIES})


def bytecode_profile(image: CodeImage, result: RunResult, method: str) -> list:
    """Cycles spent in ``method`` per bytecode index (helpers excluded)."""
    mi = image.method_index(method)
    at = dict(zip(image.addresses(), image.code))
    out = {}
    for addr, m, bc in image.source_map:
        if m != mi:
            continue
        n = result.counts[addr]
        if not n:
            continue
        ins = at[addr]
        c = n * cycle_cost(ins, False) + result.taken[addr]
        row = out.get(bc)
        if row is None:
            row = out[bc] = BytecodeRow(bc)
        row.cycles += c
        row.executed += n
        row.by_category[category(ins)] += c
    return [out[k] for k in sorted(out)]


def visits(result: RunResult, pc: int) -> list:
    """Trace row indexes at which ``pc`` was executed."""
    if result.trace is None:
        raise ValueError("run was not traced")
    return [k for k, row in enumerate(result.trace) if row.pc == pc]


def iteration_cycles(result: RunResult, pc: int) -> list:
    """Cycles between consecutive executions of the instruction at ``pc``."""
    v = visits(result, pc)
    rows = result.trace
    return [sum(r.cycles for r in rows[a:b]) for a, b in zip(v, v[1:])]


def cycles_between(result: RunResult, start_pc: int, end_pc: int) -> int:
    """Cycles from the first execution of ``start_pc`` up to (excluding) ``end_pc``."""
    rows = result.trace
    if rows is None:
        raise ValueError("run was not traced")
    total, on = 0, False
    for r in rows:
        if r.pc == start_pc:
            on = True
        if on and r.pc == end_pc:
            return total
        if on:
            total += r.cycles
    raise ValueError(f"{end_pc:#x} not reached after {start_pc:#x}")
