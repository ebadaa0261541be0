import pytest

from stackaot.bytecode.model import LoopVar, MarkLoop, ValueTag
from stackaot.compiler.emit import Emitter
from stackaot.isa import NativeOpcode
from stackaot.runtime.layout import CACHE_PAIRS, MAX_PINNED, FrameLayout
from stackaot.stackcache import BaselineStack, CacheError, CacheManager, parallel_move

N = NativeOpcode


def ops(em):
    return [it.instr.opcode for it in em.items]


# no lightweight area, no saved return address, six int slots, one ref slot
FRAME = FrameLayout(lw_area=0, ret_slot=-1, int_base=0, ref_base=12, ref_stack_base=14, size=14)


def test_baseline_stack_pushes_everything():
    em = Emitter()
    sm = BaselineStack(em)
    p = sm.getfree()
    sm.push(p)
    assert ops(em) == [N.PUSH, N.PUSH]
    sm.begin_instruction()
    sm.pop()
    assert ops(em)[-2:] == [N.POP, N.POP]


def test_cache_fills_every_pair_before_spilling():
    em = Emitter()
    sm = CacheManager(em)
    for _ in CACHE_PAIRS:
        sm.begin_instruction()
        sm.push(sm.getfree())
    assert em.items == []
    assert sorted(sm.stack) == sorted(CACHE_PAIRS)
    sm.begin_instruction()
    extra = sm.getfree()
    assert ops(em) == [N.PUSH, N.PUSH]          # the bottom element was spilled
    sm.push(extra)
    assert sm.spilled == 1
    for _ in range(len(CACHE_PAIRS) + 1):
        sm.begin_instruction()
        sm.pop()
    assert sm.spilled == 0 and sm.cached == 0
    assert ops(em)[-2:] == [N.POP, N.POP]


def test_underflow_is_an_internal_error():
    sm = CacheManager(Emitter())
    with pytest.raises(CacheError):
        sm.pop()


def test_dump_names_positions_from_the_top():
    sm = CacheManager(Emitter(), tags=True)
    a, b = sm.getfree(), sm.getfree()
    sm.push(a, ValueTag.parse("LS0"))
    sm.push(b)
    text = sm.dump()
    assert f"r{a}:Int2 LS0" in text and f"r{b}:Int1" in text
    assert CacheManager(Emitter()).dump() == "-"


def test_popped_value_reuse():
    em = Emitter()
    sm = CacheManager(em, tags=True)
    tag = ValueTag.parse("LS1")
    p = sm.getfree()
    sm.push(p, tag)
    sm.begin_instruction()
    sm.pop()
    assert sm.reuse(tag)                        # still in a register, no load needed
    sm.invalidate(tag)
    sm.begin_instruction()
    sm.pop()
    assert not sm.reuse(tag)


def _mark(*vars_, live=()):
    vs = tuple(LoopVar.parse(v, f) for v, f in vars_)
    return MarkLoop(True, vs, tuple(live))


def test_pins_respect_the_cap_in_pairs():
    em = Emitter()
    sm = CacheManager(em, layout=FRAME, pinning=True, pin_cap=3)
    mark = _mark(("LI0", 9), ("LS2", 5), ("LS3", 1), live=("LI0", "LS2", "LS3"))
    sm.pin(mark)
    pinned = {pin.var.name for pin in sm.pins}
    assert pinned == {"LI0", "LS2"}               # an int takes two pairs
    assert sum(len(pin.pairs) for pin in sm.pins) == 3
    assert ops(em).count(N.LDD) == 6
    assert [i.instr.displacement for i in em.items] == [0, 1, 2, 3, 4, 5]


def test_max_pinned_clamps():
    assert CacheManager(Emitter(), pin_cap=99).pin_cap == MAX_PINNED


def test_parallel_move_swaps():
    em = Emitter()
    parallel_move(em, [(2, 4), (4, 2)])       # (dst, src) both ways: needs a temporary
    # simulate the moves on a register file
    regs = {2: "a", 3: "a'", 4: "b", 5: "b'"}
    for it in em.items:
        ins = it.instr
        if ins.opcode is N.MOVW:
            regs[ins.rd], regs[ins.rd + 1] = regs.get(ins.rs), regs.get(ins.rs + 1)
    assert (regs[2], regs[4]) == ("b", "a")
