import random

import pytest

import helpers
from stackaot.bytecode.assembly import parse_assembly
from stackaot.compiler.codegen import OptLevel
from stackaot.runtime.helpers import HELPER_COST, Helper
from stackaot.runtime.interpreter import Interpreter
from stackaot.runtime.layout import STATIC_BASE
from stackaot.runtime.machine import Machine, WatchdogExpired, java_div, java_rem
from stackaot.runtime.memory import ArrayArg, Heap, ProgramInput, shift_count, to_signed
from stackaot.runtime.profile import bytecode_profile, cycles_between, iteration_cycles

LEVELS = list(OptLevel)


def _same(src, args, level=OptLevel.MARK_LOOPS):
    r, o = helpers.run_both(src, args, level)
    assert r.outcome.same_as(o), (r.outcome, o)
    return r, o


DIV = ".entry f\n.method f (SS)S\n.locals 2 0\n  SLOAD_0\n  SLOAD_1\n  {op}\n  SRETURN\n.end\n"
IDIV = ".entry f\n.method f (II)I\n.locals 4 0\n  ILOAD_0\n  ILOAD_2\n  {op}\n  IRETURN\n.end\n"


@pytest.mark.parametrize("level", LEVELS)
@pytest.mark.parametrize("op", ["SDIV", "SREM"])
def test_short_division(level, op):
    for a, b in ((7, 2), (-7, 2), (7, -2), (-32768, -1), (0, 5), (12345, 1)):
        r, o = _same(DIV.format(op=op), (a, b), level)
        expect = java_div(a, b, 16) if op == "SDIV" else java_rem(a, b, 16)
        assert o.value == expect


@pytest.mark.parametrize("level", LEVELS)
@pytest.mark.parametrize("op", ["IDIV", "IREM"])
def test_int_division(level, op):
    rng = random.Random(op)
    pairs = [(-2 ** 31, -1), (100000, -7), (-100000, 7)]
    pairs += [(rng.randint(-2 ** 31, 2 ** 31 - 1), rng.randint(-70000, 70000) or 1) for _ in range(6)]
    for a, b in pairs:
        _same(IDIV.format(op=op), (a, b), level)


def test_division_by_zero_traps_everywhere():
    for level in LEVELS:
        r, o = helpers.run_both(DIV.format(op="SDIV"), (1, 0), level)
        assert o.error == r.outcome.error == "division by zero"


def test_java_division_rounds_towards_zero():
    assert java_div(-7, 2, 16) == -3 and java_rem(-7, 2, 16) == -1
    assert java_div(-32768, -1, 16) == -32768


SHIFTS = ".entry f\n.method f (SS)S\n.locals 2 0\n  SLOAD_0\n  SLOAD_1\n  {op}\n  SRETURN\n.end\n"


@pytest.mark.parametrize("op", ["SSHL", "SSHR", "SUSHR"])
def test_variable_shifts(op):
    for level in LEVELS:
        for a, n in ((-12345, 0), (-12345, 3), (-12345, 15), (-12345, 16), (1, 33), (-2, 300)):
            _same(SHIFTS.format(op=op), (a, n), level)


def test_shift_count_rule():
    assert shift_count(3) == 3 and shift_count(128) == 128
    assert shift_count(129) == 0 and shift_count(256 + 4) == 4


OBJECTS = """.entry main
.statics ints=2 refs=1
.class Base ints=1 refs=1
.class Node ints=2 refs=1 parent=Base
.method main (S)S
.locals 2 2
  NEW Node
  ASTORE_0
  ALOAD_0
  SLOAD_0
  PUTFIELD_S Node 1
  NEW Base
  ASTORE_1
  ALOAD_0
  ALOAD_1
  PUTFIELD_A Base 0
  ALOAD_0
  GETFIELD_A Base 0
  SLOAD_0
  SCONST_2
  SMUL
  PUTFIELD_S Base 0
  ALOAD_0
  PUTSTATIC_A 0
  GETSTATIC_A 0
  GETFIELD_A Base 0
  GETFIELD_S Base 0
  ALOAD_0
  GETFIELD_S Node 1
  SADD
  SDUP
  PUTSTATIC_S 1
  SRETURN
.end
"""


@pytest.mark.parametrize("level", LEVELS)
def test_objects_fields_and_statics(level):
    r, o = _same(OBJECTS, (21,), level)
    assert o.value == 63
    assert r.outcome.state[2:4] == (63).to_bytes(2, "little")


ARRAYS = """.entry f
.method f (AAS)I
.locals 3 2
  ALOAD_0
  SLOAD_0
  ALOAD_1
  SLOAD_0
  BALOAD 16
  S2I
  IASTORE 16
  ALOAD_0
  SCONST_0
  IALOAD 16
  ALOAD_0
  ARRAYLENGTH
  S2I
  IADD
  IRETURN
.end
"""


@pytest.mark.parametrize("level", LEVELS)
def test_array_element_kinds(level):
    args = (ArrayArg("I", [5, -6, 7]), ArrayArg("B", [1, -2, 3]), 1)
    r, o = _same(ARRAYS, args, level)
    assert o.value == 5 + 3


def test_interpreter_checks_bounds_but_native_code_does_not():
    oob = (ArrayArg("I", [5]), ArrayArg("B", [1, 2, 3]), 2)
    r, o = helpers.run_both(ARRAYS, oob)
    assert o.error and "out of bounds" in o.error
    assert r.outcome.error is None


RECURSIVE = """.entry fib
.method fib (S)S
.locals 1 0
  SLOAD_0
  SCONST_2
  IF_SCMPLT small
  SLOAD_0
  SCONST_1
  SSUB
  INVOKESTATIC fib
  SLOAD_0
  SCONST_2
  SSUB
  INVOKESTATIC fib
  SADD
  SRETURN
small:
  SLOAD_0
  SRETURN
.end
"""


@pytest.mark.parametrize("level", LEVELS)
def test_recursion(level):
    r, o = _same(RECURSIVE, (12,), level)
    assert o.value == 144
    assert r.helper_cycles["CALL_METHOD"] >= HELPER_COST[Helper.CALL_METHOD]


def test_watchdog():
    src = ".entry f\n.method f ()V\n.locals 0 0\ntop:\n  GOTO top\n.end\n"
    with pytest.raises(WatchdogExpired):
        Machine(helpers.build(src), max_steps=1000).run()


def test_heap_layout():
    heap = Heap(2, 1)
    a = heap.new_array("S", 3)
    heap.fill_array(a, "S", [1, -1, 2])
    assert heap.u16(a) == 3
    assert heap.state()[:STATIC_BASE] == heap.state()[:STATIC_BASE]
    assert to_signed(heap.u16(a + 4), 16) == -1
    assert a == STATIC_BASE + 2 * 2 + 2 * 1


def test_wrong_argument_count():
    with pytest.raises(ValueError):
        Machine(helpers.build(helpers.SUM_TO)).run(ProgramInput((1, 2)))


def test_cycle_accounting_is_consistent():
    image = helpers.build(helpers.SUM_TO, OptLevel.POPPED_VALUE)
    r = Machine(image).run(ProgramInput((25,)), trace=True)
    assert r.value == 300
    assert sum(row.cycles for row in r.trace) + sum(r.helper_cycles.values()) == r.cycles
    # helper cycles are booked under "other"
    assert sum(r.category_cycles.values()) == r.cycles
    rows = bytecode_profile(image, r, "sum")
    assert sum(row.cycles for row in rows) <= r.cycles
    per_iter = iteration_cycles(r, helpers.label_address(image, "sum", 0))
    assert len(set(per_iter)) == 1
    start = helpers.label_address(image, "sum", 0)
    assert cycles_between(r, start, helpers.label_address(image, "sum", 1)) > 0


def test_untraced_profile_needs_no_trace():
    image = helpers.build(helpers.SUM_TO)
    r = Machine(image).run(ProgramInput((10,)))
    assert bytecode_profile(image, r, "sum")
    with pytest.raises(ValueError):
        iteration_cycles(r, 0)


def test_trace_and_summary_files(tmp_path):
    image = helpers.build(helpers.SUM_TO)
    r = Machine(image).run(ProgramInput((4,)), trace=True)
    r.write_trace_csv(tmp_path / "t.csv")
    r.write_summary_json(tmp_path / "t.json")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "pc,opcode,category,cycles,taken"
    assert len(lines) == len(r.trace) + 1
    assert '"return_value": 6' in (tmp_path / "t.json").read_text()


def test_interpreter_runs_infused_code_too():
    from stackaot.infuser import infuse

    raw = parse_assembly(helpers.SHIFT_LOOP)
    inp = ProgramInput((1000, 3))
    assert Interpreter(infuse(raw)).run(inp).same_as(Interpreter(raw).run(inp))
