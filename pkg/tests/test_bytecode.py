import pytest

import helpers
from stackaot.bench import suite
from stackaot.bytecode.assembly import AsmError, format_infusion, parse_assembly, parse_instruction
from stackaot.bytecode.binfmt import MAGIC, FormatError, read_infusion, write_infusion
from stackaot.bytecode.model import ValueTag, stack_effect
from stackaot.bytecode.opcodes import Op
from stackaot.bytecode.verify import VerifyError, verify
from stackaot.infuser import infuse

ALL = [helpers.SHIFT_LOOP, helpers.SUM_TO] + [b.source for b in suite.BENCHMARKS.values()]


@pytest.mark.parametrize("source", ALL, ids=["loop", "sum", *suite.BENCHMARKS])
def test_assembly_roundtrip(source):
    inf = parse_assembly(source)
    again = parse_assembly(format_infusion(inf))
    assert again == inf
    full = infuse(inf)
    assert parse_assembly(format_infusion(full)) == full


@pytest.mark.parametrize("source", ALL, ids=["loop", "sum", *suite.BENCHMARKS])
def test_binary_roundtrip(source):
    for inf in (parse_assembly(source), infuse(parse_assembly(source))):
        data = write_infusion(inf)
        assert data.startswith(MAGIC)
        assert read_infusion(data) == inf


def test_binary_rejects_garbage():
    data = write_infusion(parse_assembly(helpers.SHIFT_LOOP))
    with pytest.raises(FormatError):
        read_infusion(b"XXXX" + data[4:])
    with pytest.raises(FormatError):
        read_infusion(data[:-3])


def test_instruction_suffix_forms():
    assert parse_instruction("SLOAD_0") == parse_instruction("SLOAD 0")
    assert parse_instruction("SCONST_M1").args == (-1,)
    assert parse_instruction("sinc 2 -1").op is Op.SINC


def test_labels_become_branch_targets():
    body = parse_assembly(helpers.SHIFT_LOOP).method("loop").body
    assert body[0].op is Op.BRTARGET
    assert body[-3].op is Op.IF_SCMPGT and body[-3].args[0] == body[0].args[0]


def test_value_tags():
    tag = ValueTag.parse("LS0")
    assert str(tag) == "LS0" and ValueTag.unpack(tag.packed) == tag


def test_stack_effect_of_invoke():
    inf = parse_assembly(suite.get("rc5").source)
    call = next(i for m in inf.methods for i in m.body if i.op is Op.INVOKESTATIC)
    ins, outs = stack_effect(call, inf)
    assert ins == ("I", "S") and outs == ("I",)


def test_verify_depths():
    report = verify(parse_assembly(helpers.SHIFT_LOOP))
    assert report["loop"].max_int_stack == 2


BAD = {
    "underflow": ".method f ()S\n.locals 0 0\n  SADD\n  SRETURN\n.end",
    "type mismatch": ".method f ()S\n.locals 0 0\n  ICONST 1\n  SRETURN\n.end",
    "bad local": ".method f ()S\n.locals 1 0\n  SLOAD 3\n  SRETURN\n.end",
    "falls off": ".method f ()V\n.locals 0 0\n  SCONST_1\n  SPOP\n.end",
    "merge": (".method f (S)S\n.locals 1 0\n  SLOAD_0\n  IFEQ skip\n  SCONST_1\n"
              "skip:\n  SCONST_2\n  SRETURN\n.end"),
}


@pytest.mark.parametrize("name", list(BAD))
def test_verifier_rejects(name):
    with pytest.raises((VerifyError, AsmError)):
        parse_assembly(f".entry f\n{BAD[name]}\n")


@pytest.mark.parametrize("text,line", [
    (".entry f\n.method f ()V\n.locals 0 0\n  FROB\n.end\n", 4),
    (".entry f\n.method f ()V\n.locals 0 0\n  GOTO nowhere\n.end\n", 4),
    (".entry f\n.method f (Q)V\n.end\n", 2),
])
def test_assembly_errors_carry_lines(text, line):
    with pytest.raises(AsmError) as info:
        parse_assembly(text)
    assert info.value.line == line
