"""Shared programs and small utilities for the test-suite."""

from __future__ import annotations

import random
from typing import Optional

from stackaot.bytecode.assembly import parse_assembly
from stackaot.compiler.codegen import OptLevel
from stackaot.compiler.image import compile_infusion
from stackaot.infuser import InfuseOptions, infuse
from stackaot.isa import NativeInstruction, NativeOpcode
from stackaot.runtime.interpreter import Interpreter
from stackaot.runtime.machine import Machine
from stackaot.runtime.memory import ProgramInput

# do { a >>>= 1; } while (a > b); return a;
SHIFT_LOOP = """\
.entry loop
.method loop (SS)S
.locals 2 0
top:
  SLOAD_0
  SCONST_1
  SUSHR
  SSTORE_0
  SLOAD_0
  SLOAD_1
  IF_SCMPGT top
  SLOAD_0
  SRETURN
.end
"""

SUM_TO = """\
.entry sum
.method sum (S)S
.locals 3 0
  SCONST_0
  SSTORE_1
  SCONST_0
  SSTORE_2
  GOTO test
body:
  SLOAD_1
  SLOAD_2
  SADD
  SSTORE_1
  SINC 2 1
test:
  SLOAD_2
  SLOAD_0
  IF_SCMPLT body
  SLOAD_1
  SRETURN
.end
"""

RAW = InfuseOptions(constshift=False, markloop=False)


def build(source: str, level=OptLevel.MARK_LOOPS, options: InfuseOptions = InfuseOptions(),
          pin_cap: int = 7, record: bool = False):
    inf = infuse(parse_assembly(source), options)
    return compile_infusion(inf, level, pin_cap, record=record)


def run_both(source: str, args: tuple, level=OptLevel.MARK_LOOPS,
             options: InfuseOptions = InfuseOptions(), pin_cap: int = 7, trace: bool = False):
    """(simulator result, interpreter outcome) for one input."""
    raw = parse_assembly(source)
    image = compile_infusion(infuse(raw, options), level, pin_cap)
    inp = ProgramInput(tuple(args))
    return Machine(image).run(inp, trace=trace), Interpreter(raw).run(inp)


def label_address(image, method: str, index: int = 0) -> int:
    labels = image.labels[image.method_index(method)]
    return sorted(labels.values())[index]


def method_code(image, method: str) -> list:
    """Native instructions belonging to one method."""
    mi = image.method_index(method)
    owner = {a: m for a, m, _ in image.source_map}
    return [ins for a, ins in zip(image.addresses(), image.code) if owner.get(a) == mi]


def push_pop_count(code: list) -> int:
    return sum(1 for i in code if isinstance(i, NativeInstruction)
               and i.opcode in (NativeOpcode.PUSH, NativeOpcode.POP))


def branchless_program(rng: random.Random, max_depth: int, length: int = 24,
                       ints: bool = False) -> str:
    """A random straight-line method ``f(SSS)S`` whose short stack stays within ``max_depth``.

    With ``ints`` some values are widened and combined as 32-bit ints; an int
    counts as two slots towards the depth.
    """
    out = []
    stack = []                       # "S" or "I" per entry
    depth = 0

    def size(t):
        return 2 if t == "I" else 1

    def push(t, text):
        nonlocal depth
        out.append(text)
        stack.append(t)
        depth += size(t)

    def pop():
        nonlocal depth
        t = stack.pop()
        depth -= size(t)
        return t

    for _ in range(length):
        choices = []
        if depth + 1 <= max_depth:
            choices += ["load", "const"]
        if len(stack) >= 2 and stack[-1] == stack[-2] == "S":
            choices += ["sbin"] * 3
        if len(stack) >= 2 and stack[-1] == stack[-2] == "I":
            choices += ["ibin"] * 2
        if ints and stack and stack[-1] == "S" and depth + 1 <= max_depth:
            choices.append("widen")
        if stack and stack[-1] == "I":
            choices.append("narrow")
        if stack and stack[-1] == "S":
            choices.append("neg")
            if depth + 1 <= max_depth:
                choices.append("shift")
        kind = rng.choice(choices)
        if kind == "load":
            push("S", f"SLOAD {rng.randrange(3)}")
        elif kind == "const":
            push("S", f"SIPUSH {rng.randint(-300, 300)}")
        elif kind == "sbin":
            pop()
            pop()
            push("S", rng.choice(["SADD", "SSUB", "SMUL", "SAND", "SOR", "SXOR"]))
        elif kind == "ibin":
            pop()
            pop()
            push("I", rng.choice(["IADD", "ISUB", "IAND", "IOR", "IXOR", "IMUL"]))
        elif kind == "widen":
            pop()
            push("I", "S2I")
        elif kind == "narrow":
            pop()
            push("S", "I2S")
        elif kind == "shift":
            pop()
            push("S", f"SCONST {rng.randrange(1, 6)}")
            pop()
            push("S", rng.choice(["SSHL", "SSHR", "SUSHR"]))
        else:
            pop()
            push("S", "SNEG")
    if not stack:
        out.append("SCONST_0")
        stack.append("S")
    while True:
        if stack[-1] == "I":
            out.append("I2S")
            stack[-1] = "S"
        if len(stack) == 1:
            break
        out.append("SADD" if stack[-2] == "S" else "SPOP")
        stack.pop()
    body = "\n  ".join(out)
    return f".entry f\n.method f (SSS)S\n.locals 3 0\n  {body}\n  SRETURN\n.end\n"


def max_short_depth(source: str) -> int:
    from stackaot.bytecode.verify import verify

    inf = parse_assembly(source)
    return verify(inf)["f"].max_int_stack


def oracle_equal(source: str, args: tuple, level: OptLevel, pin_cap: int = 7,
                 options: Optional[InfuseOptions] = None) -> bool:
    result, expected = run_both(source, args, level, options or InfuseOptions(), pin_cap)
    return result.outcome.same_as(expected)
