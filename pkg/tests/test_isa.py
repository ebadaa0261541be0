import random

import pytest

from stackaot.isa import (CATEGORIES, HW_CONDITIONS, OPERAND_SHAPE, POINTERS, BranchCondition,
                          BranchTag, EncodingError, NativeInstruction, NativeOpcode,
                          UnresolvedBranchError, category, cycle_cost, decode_all, encode,
                          encode_all, format_instruction, parse_native, word_size)

N = NativeOpcode


def random_instruction(rng: random.Random) -> NativeInstruction:
    op = rng.choice(list(NativeOpcode))
    kw = {}
    for name in OPERAND_SHAPE[op]:
        if name in ("rd", "rs"):
            even = op in (N.MOVW, N.ADIW, N.SBIW)
            kw[name] = rng.randrange(0, 32, 2) if even else rng.randrange(32)
        elif name == "imm":
            kw[name] = {N.LDI: lambda: rng.randrange(256),
                        N.ADIW: lambda: rng.randrange(64),
                        N.SBIW: lambda: rng.randrange(64),
                        N.RJMP: lambda: rng.randint(-2048, 2047),
                        N.BR_COND: lambda: rng.randint(-64, 63)}[op]()
        elif name == "displacement":
            kw[name] = rng.randrange(64)
        elif name == "ptr":
            kw[name] = rng.choice(("Y", "Z")) if op in (N.LDD, N.STD) else rng.choice(POINTERS)
        elif name == "cond":
            kw[name] = rng.choice(HW_CONDITIONS)
        elif name == "target":
            kw[name] = rng.randrange(0x10000)
    return NativeInstruction(op, **kw)


def test_encode_decode_roundtrip():
    rng = random.Random(0)
    instrs = [random_instruction(rng) for _ in range(3000)]
    data = encode_all(instrs)
    assert len(data) == 2 * sum(word_size(i) for i in instrs)
    assert decode_all(data) == instrs


@pytest.mark.parametrize("op", list(NativeOpcode))
def test_every_opcode_roundtrips(op):
    rng = random.Random(op.value)
    for _ in range(20):
        i = random_instruction(rng)
        if i.opcode is op:
            assert decode_all(encode(i)) == [i]


def test_reference_costs():
    ldd = NativeInstruction(N.LDD, rd=24, ptr="Y", displacement=0)
    push = NativeInstruction(N.PUSH, rd=4)
    movw = NativeInstruction(N.MOVW, rd=2, rs=4)
    br = NativeInstruction(N.BR_COND, cond=BranchCondition.GE_S, imm=-3)
    assert 2 * cycle_cost(ldd) == 4
    assert cycle_cost(push) == 2
    assert cycle_cost(movw) == 1
    assert cycle_cost(br, taken=True) == 2 and cycle_cost(br, taken=False) == 1
    assert cycle_cost(NativeInstruction(N.CALL, target=0)) == 4


def test_categories():
    assert category(NativeInstruction(N.POP, rd=3)) == "push/pop"
    assert category(NativeInstruction(N.ST_INC, rs=3, ptr="X")) == "load/store"
    assert category(NativeInstruction(N.MOV, rd=3, rs=4)) == "mov"
    assert category(NativeInstruction(N.LDI, rd=16, imm=3)) == "other"
    assert set(CATEGORIES) == {"push/pop", "load/store", "mov", "other"}


@pytest.mark.parametrize("kw", [
    dict(opcode=N.LDI, rd=16, imm=256),
    dict(opcode=N.MOVW, rd=3, rs=4),
    dict(opcode=N.LDD, rd=1, ptr="X", displacement=0),
    dict(opcode=N.LDD, rd=1, ptr="Y", displacement=64),
    dict(opcode=N.BR_COND, cond=BranchCondition.GT_synth, imm=0),
    dict(opcode=N.BR_COND, cond=BranchCondition.EQ, imm=64),
    dict(opcode=N.PUSH),
    dict(opcode=N.RET, rd=1),
    dict(opcode=N.ADD, rd=32, rs=0),
])
def test_validation_rejects(kw):
    with pytest.raises(EncodingError):
        NativeInstruction(**kw)


def test_condition_inverse():
    for c in BranchCondition:
        assert c.inverted().inverted() is c
    assert not BranchCondition.GT_synth.hardware


def test_branch_tags_are_not_costed():
    with pytest.raises(UnresolvedBranchError):
        cycle_cost(BranchTag(3, BranchCondition.EQ))


def test_parse_native_labels_and_format():
    text = """
    start:  LDI r24, 5
    loop:   DEC r24
            BRNE loop
            RJMP done
            NOP
    done:   RET
    """
    instrs, labels = parse_native(text)
    assert labels == {"start": 0, "loop": 1, "done": 5}
    assert instrs[2] == NativeInstruction(N.BR_COND, cond=BranchCondition.NE, imm=-2)
    assert instrs[3] == NativeInstruction(N.RJMP, imm=1)
    again, _ = parse_native("\n".join(format_instruction(i) for i in instrs))
    assert again == instrs


def test_parse_native_errors():
    from stackaot.isa import AsmSyntaxError

    with pytest.raises(AsmSyntaxError):
        parse_native("RJMP nowhere")
    with pytest.raises(AsmSyntaxError):
        parse_native("FROB r1")
