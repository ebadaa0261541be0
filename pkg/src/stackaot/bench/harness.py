"""Benchmark runs: equivalence checking, the optimisation ladder, pin-cap sweeps.

Each benchmark is infused once with every transform enabled and compiled at
each requested level.  For every seeded input the simulator's final state
is compared against the reference interpreter running the untransformed
program, and against the benchmark's Python oracle.  Benchmarks run as
independent tasks in a process pool; each task owns its simulators.
"""

from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

from ..compiler.codegen import LEVELS, OptLevel
from ..compiler.image import compile_infusion
from ..infuser import InfuseOptions, infuse
from ..isa import CATEGORIES
from ..runtime.interpreter import Interpreter
from ..runtime.layout import CACHE_PAIRS, MAX_PINNED
from ..runtime.machine import Machine
from . import suite
from .handwritten import native_image

log = logging.getLogger(__name__)

MAX_MARKLOOP_REGRESSION = 10.0      # percent, mark loops on high-stack code only
SWEEP_CAPS = tuple(range(1, 8))
TOGGLES = ("constshift", "simul", "narrow_idx", "lightweight")


def high_stack_pressure(name: str) -> bool:
    """Operand stack deeper than the pairs left over when every pin is in use."""
    full = infuse(suite.get(name).infusion)
    return max(m.max_int_stack for m in full.methods) > len(CACHE_PAIRS) - MAX_PINNED


@dataclass
class Measurement:
    """Totals over all inputs of one benchmark for one compiled image."""

    label: str                       # level short name, "native", or a toggle
    cycles: int = 0
    code_bytes: int = 0
    categories: dict = field(default_factory=lambda: {c: 0 for c in CATEGORIES})
    helper_cycles: int = 0
    inputs: int = 0
    failures: list = field(default_factory=list)

    @property
    def equivalent(self) -> bool:
        return not self.failures

    def add(self, result) -> None:
        self.cycles += result.cycles
        self.inputs += 1
        self.helper_cycles += sum(result.helper_cycles.values())
        for c, v in result.category_cycles.items():
            self.categories[c] += v


@dataclass
class Regression:
    bench: str
    before: str
    after: str
    percent: float
    allowed: bool


@dataclass
class BenchConfig:
    levels: tuple = tuple(l.short for l in LEVELS)
    seed: int = 1
    count: int = 100
    scale: str = "small"
    pin_cap: int = 7
    sweep: bool = False
    toggles: bool = False
    native: bool = True


@dataclass
class BenchResult:
    name: str
    levels: list                     # Measurement per level, ladder order
    native: Optional[Measurement] = None
    sweep: dict = field(default_factory=dict)        # pin cap -> cycles
    toggles: dict = field(default_factory=dict)      # transform -> Measurement with it off
    elapsed: float = 0.0

    def level(self, short: str) -> Measurement:
        for m in self.levels:
            if m.label == short:
                return m
        raise KeyError(short)

    @property
    def reference(self) -> Measurement:
        """Native baseline when there is one, else the BASELINE level."""
        return self.native if self.native is not None else self.levels[0]

    @property
    def reference_label(self) -> str:
        return "native" if self.native is not None else self.levels[0].label

    def overhead(self, m: Measurement) -> float:
        ref = self.reference.cycles
        return 100.0 * (m.cycles - ref) / ref if ref else 0.0

    @property
    def failures(self) -> list:
        out = []
        for m in self.levels + ([self.native] if self.native else []) + list(self.toggles.values()):
            out += [f"{self.name}/{m.label}: {f}" for f in m.failures]
        return out

    def regressions(self) -> list:
        out = []
        high_stack = high_stack_pressure(self.name)
        for prev, cur in zip(self.levels, self.levels[1:]):
            if cur.cycles > prev.cycles:
                pct = 100.0 * (cur.cycles - prev.cycles) / prev.cycles
                allowed = (cur.label == OptLevel.MARK_LOOPS.short and high_stack
                           and pct <= MAX_MARKLOOP_REGRESSION)
                out.append(Regression(self.name, prev.label, cur.label, pct, allowed))
        return out

    @property
    def best_pin_cap(self) -> Optional[int]:
        if not self.sweep:
            return None
        return min(self.sweep, key=lambda c: (self.sweep[c], c))


@dataclass
class SuiteResult:
    config: BenchConfig
    benches: list
    elapsed: float = 0.0

    @property
    def failures(self) -> list:
        return [f for b in self.benches for f in b.failures]

    @property
    def regressions(self) -> list:
        return [r for b in self.benches for r in b.regressions()]

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {
            "config": asdict(self.config),
            "elapsed": self.elapsed,
            "benchmarks": [
                {
                    "name": b.name,
                    "reference": b.reference_label,
                    "levels": [dict(asdict(m), overhead=b.overhead(m)) for m in b.levels],
                    "native": asdict(b.native) if b.native else None,
                    "sweep": b.sweep,
                    "best_pin_cap": b.best_pin_cap,
                    "toggles": {k: asdict(v) for k, v in b.toggles.items()},
                    "regressions": [asdict(r) for r in b.regressions()],
                    "elapsed": b.elapsed,
                }
                for b in self.benches
            ],
            "failures": self.failures,
        }


# ---------------------------------------------------------------------------

def _measure(label: str, image, bench: suite.Benchmark, inputs: list, oracles: list) -> Measurement:
    m = Measurement(label, code_bytes=2 * image.size_words)
    machine = Machine(image)
    for inp, expected in zip(inputs, oracles):
        r = machine.run(inp)
        m.add(r)
        if not r.outcome.same_as(expected):
            detail = r.outcome.error or f"value {r.outcome.value} vs {expected.value}"
            m.failures.append(f"{inp.label}: differs from interpreter ({detail})")
            continue
        err = bench.check(inp, r.outcome)
        if err:
            m.failures.append(f"{inp.label}: {err}")
    return m


def run_benchmark(name: str, config: BenchConfig = BenchConfig()) -> BenchResult:
    t0 = time.perf_counter()
    bench = suite.get(name)
    raw = bench.infusion
    inputs = bench.inputs(config.seed, config.count, config.scale)
    interp = Interpreter(raw)
    oracles = [interp.run(inp) for inp in inputs]
    full = infuse(raw)
    levels = []
    for short in config.levels:
        level = OptLevel.parse(short)
        image = compile_infusion(full, level, config.pin_cap)
        levels.append(_measure(level.short, image, bench, inputs, oracles))
    result = BenchResult(name, levels)
    if config.native and bench.native:
        result.native = _measure("native", native_image(bench.native_source(), raw), bench,
                                 inputs, oracles)
    if config.sweep:
        for cap in SWEEP_CAPS:
            image = compile_infusion(full, OptLevel.MARK_LOOPS, cap)
            result.sweep[cap] = _measure(f"pin{cap}", image, bench, inputs, oracles).cycles
    if config.toggles:
        for opt in TOGGLES:
            image = compile_infusion(infuse(raw, InfuseOptions(**{opt: False})),
                                     OptLevel.MARK_LOOPS, config.pin_cap)
            result.toggles[opt] = _measure(f"no-{opt}", image, bench, inputs, oracles)
    result.elapsed = time.perf_counter() - t0
    log.info("%s done in %.1fs", name, result.elapsed)
    return result


def _run_packed(args):
    return run_benchmark(*args)


def run_suite(names: Optional[Sequence[str]] = None, config: BenchConfig = BenchConfig(),
              workers: Optional[int] = None) -> SuiteResult:
    names = list(names or suite.BENCHMARKS)
    for n in names:
        suite.get(n)
    t0 = time.perf_counter()
    workers = workers or min(len(names), os.cpu_count() or 1)
    jobs = [(n, config) for n in names]
    if workers <= 1:
        benches = [_run_packed(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            benches = list(pool.map(_run_packed, jobs))
    return SuiteResult(config, benches, time.perf_counter() - t0)
