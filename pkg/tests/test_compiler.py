import random

import pytest

import helpers
from stackaot.bench import suite
from stackaot.compiler.branches import resolve_branches
from stackaot.compiler.codegen import CompileError, OptLevel
from stackaot.compiler.emit import Emitter, Item, Label
from stackaot.compiler.image import CodeImage, compile_infusion
from stackaot.compiler.peephole import peephole_basic, peephole_improved
from stackaot.infuser import InfuseOptions, infuse
from stackaot.isa import (BranchCondition, BranchTag, NativeInstruction, NativeOpcode,
                          word_size)
from stackaot.runtime.interpreter import Interpreter
from stackaot.runtime.machine import Machine
from stackaot.runtime.memory import ProgramInput

N = NativeOpcode


def _items(*instrs):
    return [Item(i if not isinstance(i, tuple) else NativeInstruction(i[0], **i[1])) for i in instrs]


def push(pair):
    return [NativeInstruction(N.PUSH, rd=pair + 1), NativeInstruction(N.PUSH, rd=pair)]


def pop(pair):
    return [NativeInstruction(N.POP, rd=pair), NativeInstruction(N.POP, rd=pair + 1)]


def instrs(items):
    return [it.instr for it in items]


def test_basic_peephole_adjacent_pair():
    out = peephole_basic(_items(*push(24), *pop(22)))
    assert instrs(out) == [NativeInstruction(N.MOVW, rd=22, rs=24)]
    assert peephole_basic(_items(*push(24), *pop(24))) == []


def test_basic_peephole_leaves_separated_pairs():
    mid = NativeInstruction(N.LDI, rd=18, imm=1)
    items = _items(*push(24), mid, *pop(22))
    assert peephole_basic(items) == items


def test_improved_peephole_across_safe_window():
    mid = NativeInstruction(N.LDI, rd=18, imm=1)
    out = instrs(peephole_improved(_items(*push(24), mid, *pop(22))))
    assert out == [NativeInstruction(N.MOVW, rd=22, rs=24), mid]


def test_improved_peephole_respects_clobbers_and_barriers():
    clobber = NativeInstruction(N.LDI, rd=22, imm=1)
    items = _items(*push(24), clobber, *pop(22))
    assert peephole_improved(items) == items
    items = [Item(x) for x in push(24)] + [Item(Label(3))] + [Item(x) for x in pop(22)]
    assert peephole_improved(items) == items


def test_improved_peephole_nested():
    out = instrs(peephole_improved(_items(*push(24), *push(20), *pop(18), *pop(16))))
    # the outer pair is rewritten first; the inner window never touches r16:r17
    assert out == [NativeInstruction(N.MOVW, rd=16, rs=24), NativeInstruction(N.MOVW, rd=18, rs=20)]


def _branch_program(gap: int, cond=BranchCondition.EQ):
    em = Emitter()
    em.label(0)
    for _ in range(gap):
        em.op(N.NOP)
    em.branch(0, cond)
    em.branch(1)
    em.label(1)
    return em.items


@pytest.mark.parametrize("gap,expect", [(10, 1), (63, 1), (64, 2), (3000, 3)])
def test_branch_sizes(gap, expect):
    out, labels = resolve_branches(_branch_program(gap), base=100)
    assert labels[0] == 100
    tail = out[gap:]
    conditional = tail[:min(expect, 2)]
    assert sum(word_size(i.instr) for i in conditional) == expect
    if expect == 1:
        assert conditional[0].instr.imm == -(gap + 1)
    elif expect == 2:
        assert conditional[0].instr.cond is BranchCondition.NE
        assert conditional[1].instr.opcode is N.RJMP
    else:
        assert conditional[1].instr == NativeInstruction(N.JMP, target=100)
    # the forward jump to the next instruction shrinks to RJMP +0
    assert out[-1].instr == NativeInstruction(N.RJMP, imm=0)


def test_no_tags_survive():
    out, _ = resolve_branches(_branch_program(200))
    assert not any(isinstance(i.instr, (BranchTag, Label)) for i in out)


def _long_loop(n_ops: int) -> str:
    body = "\n".join(["  SLOAD_1\n  SCONST_3\n  SXOR\n  SSTORE_1"] * n_ops)
    return helpers.SUM_TO.replace("  SINC 2 1\n", body + "\n  SINC 2 1\n")


@pytest.mark.parametrize("n_ops", [1, 20, 400])
@pytest.mark.parametrize("level", list(OptLevel))
def test_loops_of_every_branch_size(n_ops, level):
    src = _long_loop(n_ops)
    for n in (0, 3, 17):
        assert helpers.oracle_equal(src, (n,), level)


@pytest.mark.parametrize("level", list(OptLevel))
def test_random_straight_line_programs(level):
    rng = random.Random(int(level) + 100)
    for k in range(40):
        src = helpers.branchless_program(rng, rng.randint(3, 14), length=40, ints=k % 2 == 0)
        args = tuple(rng.randint(-32768, 32767) for _ in range(3))
        for cap in (0, 3, 7):
            assert helpers.oracle_equal(src, args, level, pin_cap=cap), src


def test_deep_stacks_spill_and_stay_correct():
    rng = random.Random(2)
    spilled = 0
    for _ in range(20):
        src = helpers.branchless_program(rng, 20, length=60)
        image = helpers.build(src, OptLevel.POPPED_VALUE)
        spilled += helpers.push_pop_count(helpers.method_code(image, "f")) > 0
        args = tuple(rng.randint(-999, 999) for _ in range(3))
        assert helpers.oracle_equal(src, args, OptLevel.POPPED_VALUE)
    assert spilled


def test_baseline_is_push_pop_heavy():
    image = helpers.build(helpers.SHIFT_LOOP, OptLevel.BASELINE, helpers.RAW)
    assert helpers.push_pop_count(helpers.method_code(image, "loop")) >= 6


def test_imul_under_full_pins():
    # fft without the SIMUL fold keeps a 32-bit multiply inside a loop that
    # pins most pairs; the product pairs are then borrowed from the pins
    bench = suite.get("fft")
    full = infuse(bench.infusion, InfuseOptions(simul=False))
    inputs = bench.inputs(3, 5)
    for cap in range(8):
        m = Machine(compile_infusion(full, OptLevel.MARK_LOOPS, cap))
        for inp in inputs:
            r = m.run(inp)
            assert r.outcome.same_as(Interpreter(bench.infusion).run(inp)), (cap, inp.label)


def test_image_roundtrip(tmp_path):
    image = helpers.build(helpers.SUM_TO)
    path = tmp_path / "sum.img"
    image.write(path)
    again = CodeImage.read(path)
    assert again.code == image.code
    assert again.source_map == image.source_map
    assert again.methods == image.methods
    assert Machine(again).run(ProgramInput((9,))).value == 36


def test_listing_mentions_every_bytecode_category():
    text = helpers.build(helpers.SHIFT_LOOP, OptLevel.BASELINE, helpers.RAW).listing("loop")
    for word in ("push/pop", "load/store", "mov", "other"):
        assert word in text


def test_source_form_lightweight_rejected_by_compiler():
    from stackaot.bytecode.assembly import parse_assembly

    src = """.entry main
.method twice (S)S
.lightweight
.locals 1 0
  SLOAD_0
  SRETURN
.end
.method main (S)S
.locals 1 0
  SLOAD_0
  INVOKESTATIC twice
  SRETURN
.end
"""
    with pytest.raises(CompileError):
        compile_infusion(parse_assembly(src))


def test_pin_cap_zero_matches_popped_code_size():
    full = infuse(suite.get("bsort").infusion)
    a = compile_infusion(full, OptLevel.MARK_LOOPS, 0)
    b = compile_infusion(full, OptLevel.POPPED_VALUE)
    assert abs(a.size_words - b.size_words) <= 8
