import random

import pytest

import helpers
from stackaot.bench import suite
from stackaot.bytecode.assembly import parse_assembly
from stackaot.bytecode.opcodes import Op
from stackaot.bytecode.verify import VerifyError
from stackaot.compiler.codegen import OptLevel
from stackaot.infuser import (InfuseOptions, RecursionCycleError, InfuserError,
                              find_inner_loops, infuse, lightweight_cycle)
from stackaot.runtime.interpreter import Interpreter
from stackaot.runtime.memory import ProgramInput


def ops(inf, name):
    return [i.op for i in inf.method(name).body]


def test_constant_shift_fold():
    full = infuse(parse_assembly(helpers.SHIFT_LOOP), InfuseOptions(markloop=False))
    body = full.method("loop").body
    assert Op.SUSHR not in [i.op for i in body]
    folded = next(i for i in body if i.op is Op.SUSHR_CONST)
    assert folded.args == (1,)


def test_constant_shift_needs_a_constant():
    src = (".entry f\n.method f (SS)S\n.locals 2 0\n  SLOAD_0\n  SLOAD_1\n  SSHL\n"
           "  SCONST 20\n  SSHR\n  SRETURN\n.end\n")
    full = infuse(parse_assembly(src))
    assert ops(full, "f").count(Op.SSHL) == 1
    assert Op.SSHR in ops(full, "f")            # amounts above 15 are left alone


SIMUL_SRC = """.entry f
.method f (SS)I
.locals 2 0
  SLOAD_0
  S2I
  SLOAD_1
  S2I
  IMUL
  IRETURN
.end
"""


def test_simul_fold():
    full = infuse(parse_assembly(SIMUL_SRC))
    assert ops(full, "f") == [Op.SLOAD, Op.SLOAD, Op.SIMUL, Op.IRETURN]
    assert Op.IMUL in ops(infuse(parse_assembly(SIMUL_SRC), InfuseOptions(simul=False)), "f")
    for a, b in ((300, -300), (-32768, -32768), (32767, 2)):
        assert helpers.oracle_equal(SIMUL_SRC, (a, b), OptLevel.MARK_LOOPS)


NARROW_SRC = """.entry f
.method f (AS)S
.locals 1 1
  ALOAD_0
  SLOAD_0
  S2I
  SALOAD 32
  SRETURN
.end
"""


def test_narrow_index():
    full = infuse(parse_assembly(NARROW_SRC))
    body = full.method("f").body
    assert Op.S2I not in [i.op for i in body]
    assert next(i for i in body if i.op is Op.SALOAD).args == (16,)


def test_mark_loop_tags_and_liveness():
    full = infuse(parse_assembly(helpers.SHIFT_LOOP))
    marks = [i.args[0] for i in full.method("loop").body if i.op is Op.MARKLOOP]
    begin, end = marks
    assert begin.begin and not end.begin
    freq = {v.name: v.frequency for v in begin.variables}
    assert freq == {"LS0": 3, "LS1": 1}
    assert set(begin.live) == {"LS0", "LS1"}
    assert end.live == ("LS0",)


def test_loops_with_early_exit_are_not_marked():
    src = """.entry f
.method f (S)S
.locals 1 0
top:
  SLOAD_0
  IFEQ out
  SINC 0 -1
  GOTO top
out:
  SLOAD_0
  SRETURN
.end
"""
    assert find_inner_loops(parse_assembly(src).method("f")) == []
    assert Op.MARKLOOP not in ops(infuse(parse_assembly(src)), "f")
    for v in (0, 5, 127):
        assert helpers.oracle_equal(src, (v,), OptLevel.MARK_LOOPS)


def test_sum_loop_is_marked():
    full = infuse(parse_assembly(helpers.SUM_TO))
    assert ops(full, "sum").count(Op.MARKLOOP) == 2
    for n in (0, 1, 10, 200):
        assert helpers.oracle_equal(helpers.SUM_TO, (n,), OptLevel.MARK_LOOPS)


LW_SRC = """.entry main
.method twice (S)S
.lightweight
.locals 1 0
  SLOAD_0
  SLOAD_0
  SADD
  SRETURN
.end
.method main (S)S
.locals 1 0
  SLOAD_0
  INVOKESTATIC twice
  SRETURN
.end
"""


def test_lightweight_conversion():
    full = infuse(parse_assembly(LW_SRC))
    twice = full.method("twice")
    assert [i.op for i in twice.body[:2]] == [Op.LW_PARAMETER, Op.SSTORE]
    assert Op.INVOKELIGHT in ops(full, "main")
    assert full.methods[0].name == "twice"      # callees first
    off = infuse(parse_assembly(LW_SRC), InfuseOptions(lightweight=False))
    assert not off.method("twice").lightweight
    assert Op.INVOKESTATIC in ops(off, "main")
    for level in OptLevel:
        assert helpers.oracle_equal(LW_SRC, (21,), level)
        assert helpers.oracle_equal(LW_SRC, (21,), level, options=InfuseOptions(lightweight=False))


def test_lightweight_recursion_rejected():
    src = LW_SRC.replace("  SADD\n", "  SADD\n  INVOKESTATIC twice\n")
    inf = parse_assembly(src)
    assert lightweight_cycle(inf) == ["twice", "twice"]
    with pytest.raises(RecursionCycleError):
        infuse(inf)


def test_lightweight_may_not_allocate():
    src = LW_SRC.replace("  SADD\n", "  SADD\n  SCONST_2\n  NEWARRAY S\n  ASTORE_0\n").replace(
        ".lightweight\n.locals 1 0", ".lightweight\n.locals 1 1")
    with pytest.raises(VerifyError):
        parse_assembly(src)
    with pytest.raises(InfuserError):
        infuse(parse_assembly(src, verify=False))


@pytest.mark.parametrize("name", list(suite.BENCHMARKS))
@pytest.mark.parametrize("option", ["constshift", "simul", "narrow_idx", "markloop", "lightweight"])
def test_each_transform_preserves_semantics(name, option):
    bench = suite.get(name)
    raw = bench.infusion
    on = infuse(raw)
    off = infuse(raw, InfuseOptions(**{option: False}))
    for inp in bench.inputs(7, 3):
        expect = Interpreter(raw).run(inp)
        assert Interpreter(on).run(inp).same_as(expect)
        assert Interpreter(off).run(inp).same_as(expect)


def test_infuse_is_pure():
    raw = parse_assembly(helpers.SHIFT_LOOP)
    before = raw.copy()
    infuse(raw)
    assert raw == before


def test_random_programs_survive_infusion():
    rng = random.Random(5)
    for _ in range(30):
        src = helpers.branchless_program(rng, 8, ints=True)
        inp = ProgramInput(tuple(rng.randint(-500, 500) for _ in range(3)))
        raw = parse_assembly(src)
        assert Interpreter(infuse(raw)).run(inp).same_as(Interpreter(raw).run(inp))
