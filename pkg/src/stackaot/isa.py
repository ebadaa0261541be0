"""AVR-like target instruction set.

Instructions are byte-register operations on 32 8-bit registers.  The stack
cache and code generator treat registers in even/odd pairs, but every emitted
instruction is a real 8-bit operation with its own cycle cost, which is what
lets per-row costs of the worked examples add up (a 16-bit load is two
``LDD`` at 2 cycles each).

Word sizes: every instruction is one 16-bit word except ``JMP``/``CALL``
(two words).  Branch tags emitted during code generation are placeholders
that occupy three words until the branch resolver replaces them.

Bit layouts are documented in ``docs/encoding.md``.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Iterable, Optional, Union


class NativeOpcode(enum.Enum):
    PUSH = "PUSH"
    POP = "POP"
    LD_INC = "LD_INC"
    LD_DEC = "LD_DEC"
    ST_INC = "ST_INC"
    ST_DEC = "ST_DEC"
    LDD = "LDD"
    STD = "STD"
    LDI = "LDI"
    MOV = "MOV"
    MOVW = "MOVW"
    ADD = "ADD"
    ADC = "ADC"
    SUB = "SUB"
    SBC = "SBC"
    SBIW = "SBIW"
    ADIW = "ADIW"
    AND = "AND"
    OR = "OR"
    EOR = "EOR"
    INC = "INC"
    DEC = "DEC"
    LSR = "LSR"
    LSL = "LSL"
    ROL = "ROL"
    ROR = "ROR"
    ASR = "ASR"
    CP = "CP"
    CPC = "CPC"
    MUL = "MUL"
    MULS = "MULS"
    RJMP = "RJMP"
    BR_COND = "BR_COND"
    JMP = "JMP"
    CALL = "CALL"
    RET = "RET"
    IJMP = "IJMP"
    NOP = "NOP"
    BREAK = "BREAK"


class BranchCondition(enum.Enum):
    EQ = "EQ"
    NE = "NE"
    LT_S = "LT_S"
    GE_S = "GE_S"
    LT_U = "LT_U"
    GE_U = "GE_U"
    PL = "PL"
    MI = "MI"
    # Logical conditions only; lowered by operand swap before emission.
    GT_synth = "GT_synth"
    LE_synth = "LE_synth"

    @property
    def hardware(self) -> bool:
        return self not in (BranchCondition.GT_synth, BranchCondition.LE_synth)

    def inverted(self) -> "BranchCondition":
        return _INVERSE[self]


_INVERSE = {
    BranchCondition.EQ: BranchCondition.NE,
    BranchCondition.NE: BranchCondition.EQ,
    BranchCondition.LT_S: BranchCondition.GE_S,
    BranchCondition.GE_S: BranchCondition.LT_S,
    BranchCondition.LT_U: BranchCondition.GE_U,
    BranchCondition.GE_U: BranchCondition.LT_U,
    BranchCondition.PL: BranchCondition.MI,
    BranchCondition.MI: BranchCondition.PL,
    BranchCondition.GT_synth: BranchCondition.LE_synth,
    BranchCondition.LE_synth: BranchCondition.GT_synth,
}

HW_CONDITIONS = [c for c in BranchCondition if c.hardware]

POINTERS = ("X", "Y", "Z")


class EncodingError(ValueError):
    """Malformed instruction or undecodable word stream."""

    def __init__(self, message: str, offset: Optional[int] = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class UnresolvedBranchError(ValueError):
    pass


# Operand shapes: which fields each opcode requires.
_SHAPE = {}
for _op in ("PUSH", "POP", "INC", "DEC", "LSR", "LSL", "ROL", "ROR", "ASR"):
    _SHAPE[_op] = ("rd",)
for _op in ("MOV", "ADD", "ADC", "SUB", "SBC", "AND", "OR", "EOR", "CP", "CPC", "MUL", "MULS"):
    _SHAPE[_op] = ("rd", "rs")
_SHAPE.update({
    "MOVW": ("rd", "rs"),
    "LD_INC": ("rd", "ptr"),
    "LD_DEC": ("rd", "ptr"),
    "ST_INC": ("rs", "ptr"),
    "ST_DEC": ("rs", "ptr"),
    "LDD": ("rd", "ptr", "displacement"),
    "STD": ("rs", "ptr", "displacement"),
    "LDI": ("rd", "imm"),
    "ADIW": ("rd", "imm"),
    "SBIW": ("rd", "imm"),
    "RJMP": ("imm",),
    "BR_COND": ("cond", "imm"),
    "JMP": ("target",),
    "CALL": ("target",),
    "RET": (),
    "IJMP": (),
    "NOP": (),
    "BREAK": (),
})
OPERAND_SHAPE = {NativeOpcode[k]: v for k, v in _SHAPE.items()}
_ALL_FIELDS = ("rd", "rs", "imm", "displacement", "cond", "target", "ptr")


@dataclass(frozen=True)
class NativeInstruction:
    """One target instruction.

    ``imm`` holds the relative word displacement for ``RJMP``/``BR_COND``
    (``PC <- PC + imm + 1``); ``target`` holds absolute word addresses for
    ``JMP``/``CALL``.
    """

    opcode: NativeOpcode
    rd: Optional[int] = None
    rs: Optional[int] = None
    imm: Optional[int] = None
    displacement: Optional[int] = None
    cond: Optional[BranchCondition] = None
    target: Optional[int] = None
    ptr: Optional[str] = None

    def __post_init__(self):
        validate(self)

    def __str__(self) -> str:
        return format_instruction(self)


@dataclass(frozen=True)
class BranchTag:
    """Placeholder for a branch to a branch-target id, resolved after layout.

    ``cond`` of ``None`` is an unconditional jump.
    """

    label: int
    cond: Optional[BranchCondition] = None

    def __str__(self) -> str:
        c = self.cond.value if self.cond else "ALWAYS"
        return f"BRTAG {c} L{self.label}"


AnyInstruction = Union[NativeInstruction, BranchTag]


def validate(instr: NativeInstruction) -> None:
    shape = OPERAND_SHAPE[instr.opcode]
    for name in _ALL_FIELDS:
        present = getattr(instr, name) is not None
        if present != (name in shape):
            what = "missing" if name in shape else "unexpected"
            raise EncodingError(f"{instr.opcode.value}: {what} operand {name}")
    op = instr.opcode
    for name in ("rd", "rs"):
        r = getattr(instr, name)
        if r is not None and not 0 <= r <= 31:
            raise EncodingError(f"{op.value}: register {r} out of range")
    if op in (NativeOpcode.MOVW, NativeOpcode.ADIW, NativeOpcode.SBIW):
        if instr.rd % 2 or (instr.rs is not None and instr.rs % 2):
            raise EncodingError(f"{op.value}: register pair must start at an even register")
    if op in (NativeOpcode.ADIW, NativeOpcode.SBIW) and not 0 <= instr.imm <= 63:
        raise EncodingError(f"{op.value}: immediate {instr.imm} outside [0,63]")
    if op is NativeOpcode.LDI and not 0 <= instr.imm <= 255:
        raise EncodingError(f"LDI: immediate {instr.imm} outside [0,255]")
    if op in (NativeOpcode.LDD, NativeOpcode.STD):
        if not 0 <= instr.displacement <= 63:
            raise EncodingError(f"{op.value}: displacement {instr.displacement} outside [0,63]")
        if instr.ptr not in ("Y", "Z"):
            raise EncodingError(f"{op.value}: displacement addressing needs Y or Z")
    if instr.ptr is not None and instr.ptr not in POINTERS:
        raise EncodingError(f"{op.value}: unknown pointer {instr.ptr}")
    if op is NativeOpcode.BR_COND:
        if not instr.cond.hardware:
            raise EncodingError(f"BR_COND: {instr.cond.value} is not a hardware condition")
        if not -64 <= instr.imm <= 63:
            raise EncodingError(f"BR_COND: displacement {instr.imm} outside [-64,63]")
    if op is NativeOpcode.RJMP and not -2048 <= instr.imm <= 2047:
        raise EncodingError(f"RJMP: displacement {instr.imm} outside [-2048,2047]")
    if op in (NativeOpcode.JMP, NativeOpcode.CALL) and not 0 <= instr.target <= 0xFFFF:
        raise EncodingError(f"{op.value}: target {instr.target} outside 16-bit word space")


# ---------------------------------------------------------------------------
# sizes and costs

def word_size(instr: AnyInstruction) -> int:
    if isinstance(instr, BranchTag):
        return 3
    if instr.opcode in (NativeOpcode.JMP, NativeOpcode.CALL):
        return 2
    return 1


def _build_cost_table() -> dict:
    two = {"PUSH", "POP", "LD_INC", "LD_DEC", "ST_INC", "ST_DEC", "LDD", "STD",
           "ADIW", "SBIW", "MUL", "MULS", "RJMP", "IJMP"}
    table = {}
    for op in NativeOpcode:
        if op.value in two:
            cost = 2
        elif op is NativeOpcode.JMP:
            cost = 3
        elif op in (NativeOpcode.CALL, NativeOpcode.RET):
            cost = 4
        else:
            cost = 1
        table[(op, False)] = cost
        table[(op, True)] = cost
    table[(NativeOpcode.BR_COND, True)] = 2
    table[(NativeOpcode.BR_COND, False)] = 1
    return table


CYCLE_COSTS = _build_cost_table()


def cycle_cost(instr: AnyInstruction, taken: bool = False) -> int:
    if isinstance(instr, BranchTag):
        raise UnresolvedBranchError(f"cannot cost unresolved {instr}")
    return CYCLE_COSTS[(instr.opcode, bool(taken))]


CATEGORIES = ("push/pop", "load/store", "mov", "other")

_CATEGORY = {}
for _op in NativeOpcode:
    if _op in (NativeOpcode.PUSH, NativeOpcode.POP):
        _CATEGORY[_op] = "push/pop"
    elif _op in (NativeOpcode.LD_INC, NativeOpcode.LD_DEC, NativeOpcode.ST_INC,
                 NativeOpcode.ST_DEC, NativeOpcode.LDD, NativeOpcode.STD):
        _CATEGORY[_op] = "load/store"
    elif _op in (NativeOpcode.MOV, NativeOpcode.MOVW):
        _CATEGORY[_op] = "mov"
    else:
        _CATEGORY[_op] = "other"


def category(instr: AnyInstruction) -> str:
    if isinstance(instr, BranchTag):
        return "other"
    return _CATEGORY[instr.opcode]


# ---------------------------------------------------------------------------
# binary encoding

_MAIN_OPS = ["MOV", "ADD", "ADC", "SUB", "SBC", "AND", "OR", "EOR", "CP", "CPC",
             "MUL", "MULS", "MOVW", "LD_INC", "LD_DEC", "ST_INC", "ST_DEC",
             "ADIW", "SBIW", "JMP", "CALL"]
_MISC_OPS = ["PUSH", "POP", "INC", "DEC", "LSR", "LSL", "ROL", "ROR", "ASR",
             "RET", "IJMP", "NOP", "BREAK"]
_MAIN_CODE = {NativeOpcode[n]: i for i, n in enumerate(_MAIN_OPS)}
_MISC_CODE = {NativeOpcode[n]: i for i, n in enumerate(_MISC_OPS)}
_COND_CODE = {c: i for i, c in enumerate(HW_CONDITIONS)}
_PTR_CODE = {p: i for i, p in enumerate(POINTERS)}


def _signed(value: int, bits: int) -> int:
    value &= (1 << bits) - 1
    return value - (1 << bits) if value & (1 << (bits - 1)) else value


def encode_words(instr: AnyInstruction) -> list:
    if isinstance(instr, BranchTag):
        raise UnresolvedBranchError(f"cannot encode unresolved {instr}")
    op = instr.opcode
    if op is NativeOpcode.LDD:
        return [(0b000 << 13) | (instr.rd << 8) | ((instr.ptr == "Z") << 7) | (instr.displacement << 1)]
    if op is NativeOpcode.STD:
        return [(0b001 << 13) | (instr.rs << 8) | ((instr.ptr == "Z") << 7) | (instr.displacement << 1)]
    if op is NativeOpcode.LDI:
        return [(0b010 << 13) | (instr.rd << 8) | instr.imm]
    if op is NativeOpcode.RJMP:
        return [(0b0110 << 12) | (instr.imm & 0xFFF)]
    if op is NativeOpcode.BR_COND:
        return [(0b01110 << 11) | (_COND_CODE[instr.cond] << 8) | (instr.imm & 0x7F)]
    if op in _MISC_CODE:
        rd = instr.rd or 0
        return [(0b01111 << 11) | (_MISC_CODE[op] << 7) | (rd << 2)]
    code = 0x8000 | (_MAIN_CODE[op] << 10)
    if op is NativeOpcode.MOVW:
        return [code | ((instr.rd // 2) << 4) | (instr.rs // 2)]
    if op in (NativeOpcode.LD_INC, NativeOpcode.LD_DEC):
        return [code | (instr.rd << 5) | _PTR_CODE[instr.ptr]]
    if op in (NativeOpcode.ST_INC, NativeOpcode.ST_DEC):
        return [code | (instr.rs << 5) | _PTR_CODE[instr.ptr]]
    if op in (NativeOpcode.ADIW, NativeOpcode.SBIW):
        return [code | ((instr.rd // 2) << 6) | instr.imm]
    if op in (NativeOpcode.JMP, NativeOpcode.CALL):
        return [code, instr.target]
    return [code | (instr.rd << 5) | instr.rs]


def encode(instr: AnyInstruction) -> bytes:
    """Little-endian byte encoding of one instruction."""
    return b"".join(w.to_bytes(2, "little") for w in encode_words(instr))


def decode_word(words, index: int, byte_offset: int = 0):
    """Decode the instruction starting at ``words[index]``.

    Returns ``(instruction, word_count)``.
    """
    w = words[index]
    top3 = w >> 13
    if top3 == 0b000:
        return NativeInstruction(NativeOpcode.LDD, rd=(w >> 8) & 31, ptr="Z" if w & 0x80 else "Y",
                                 displacement=(w >> 1) & 63), 1
    if top3 == 0b001:
        return NativeInstruction(NativeOpcode.STD, rs=(w >> 8) & 31, ptr="Z" if w & 0x80 else "Y",
                                 displacement=(w >> 1) & 63), 1
    if top3 == 0b010:
        return NativeInstruction(NativeOpcode.LDI, rd=(w >> 8) & 31, imm=w & 0xFF), 1
    if w >> 12 == 0b0110:
        return NativeInstruction(NativeOpcode.RJMP, imm=_signed(w, 12)), 1
    if w >> 11 == 0b01110:
        cc = (w >> 8) & 7
        return NativeInstruction(NativeOpcode.BR_COND, cond=HW_CONDITIONS[cc], imm=_signed(w, 7)), 1
    if w >> 11 == 0b01111:
        sub = (w >> 7) & 15
        if sub >= len(_MISC_OPS):
            raise EncodingError(f"unknown opcode word {w:#06x}", byte_offset)
        op = NativeOpcode[_MISC_OPS[sub]]
        if OPERAND_SHAPE[op]:
            return NativeInstruction(op, rd=(w >> 2) & 31), 1
        return NativeInstruction(op), 1
    code = (w >> 10) & 31
    if code >= len(_MAIN_OPS):
        raise EncodingError(f"unknown opcode word {w:#06x}", byte_offset)
    op = NativeOpcode[_MAIN_OPS[code]]
    if op is NativeOpcode.MOVW:
        return NativeInstruction(op, rd=((w >> 4) & 15) * 2, rs=(w & 15) * 2), 1
    if op in (NativeOpcode.LD_INC, NativeOpcode.LD_DEC):
        p = w & 3
        if p > 2:
            raise EncodingError(f"bad pointer field in {w:#06x}", byte_offset)
        return NativeInstruction(op, rd=(w >> 5) & 31, ptr=POINTERS[p]), 1
    if op in (NativeOpcode.ST_INC, NativeOpcode.ST_DEC):
        p = w & 3
        if p > 2:
            raise EncodingError(f"bad pointer field in {w:#06x}", byte_offset)
        return NativeInstruction(op, rs=(w >> 5) & 31, ptr=POINTERS[p]), 1
    if op in (NativeOpcode.ADIW, NativeOpcode.SBIW):
        return NativeInstruction(op, rd=((w >> 6) & 15) * 2, imm=w & 63), 1
    if op in (NativeOpcode.JMP, NativeOpcode.CALL):
        if index + 1 >= len(words):
            raise EncodingError(f"truncated {op.value}", byte_offset + 2)
        return NativeInstruction(op, target=words[index + 1]), 2
    return NativeInstruction(op, rd=(w >> 5) & 31, rs=w & 31), 1


def bytes_to_words(data: bytes) -> list:
    if len(data) % 2:
        raise EncodingError("truncated word stream", len(data) - 1)
    return [int.from_bytes(data[i:i + 2], "little") for i in range(0, len(data), 2)]


def decode(data: bytes) -> NativeInstruction:
    """Decode exactly one instruction from ``data``."""
    instrs = decode_all(data)
    if len(instrs) != 1:
        raise EncodingError(f"expected one instruction, found {len(instrs)}")
    return instrs[0]


def decode_all(data: bytes) -> list:
    words = bytes_to_words(data)
    out = []
    i = 0
    while i < len(words):
        instr, n = decode_word(words, i, 2 * i)
        out.append(instr)
        i += n
    return out


def encode_all(instrs: Iterable[AnyInstruction]) -> bytes:
    return b"".join(encode(i) for i in instrs)


# ---------------------------------------------------------------------------
# textual form (used by native baselines and listings)

_MNEMONIC_TEXT = {
    NativeOpcode.LD_INC: "LD", NativeOpcode.LD_DEC: "LD",
    NativeOpcode.ST_INC: "ST", NativeOpcode.ST_DEC: "ST",
}


def format_instruction(i: NativeInstruction) -> str:
    op = i.opcode
    if op is NativeOpcode.LD_INC:
        return f"LD r{i.rd}, {i.ptr}+"
    if op is NativeOpcode.LD_DEC:
        return f"LD r{i.rd}, -{i.ptr}"
    if op is NativeOpcode.ST_INC:
        return f"ST {i.ptr}+, r{i.rs}"
    if op is NativeOpcode.ST_DEC:
        return f"ST -{i.ptr}, r{i.rs}"
    if op is NativeOpcode.LDD:
        return f"LDD r{i.rd}, {i.ptr}+{i.displacement}"
    if op is NativeOpcode.STD:
        return f"STD {i.ptr}+{i.displacement}, r{i.rs}"
    if op is NativeOpcode.BR_COND:
        return f"BR{i.cond.value} {i.imm:+d}"
    if op is NativeOpcode.RJMP:
        return f"RJMP {i.imm:+d}"
    if op in (NativeOpcode.JMP, NativeOpcode.CALL):
        return f"{op.value} {i.target:#06x}"
    if op in (NativeOpcode.MOVW,):
        return f"MOVW r{i.rd}, r{i.rs}"
    if op in (NativeOpcode.ADIW, NativeOpcode.SBIW, NativeOpcode.LDI):
        return f"{op.value} r{i.rd}, {i.imm}"
    parts = [f"r{getattr(i, f)}" for f in ("rd", "rs") if getattr(i, f) is not None]
    return f"{op.value} {', '.join(parts)}".strip()


class AsmSyntaxError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


_REG = r"r(\d+)"


def parse_native(text: str, symbols: Optional[dict] = None):
    """Parse native assembly text into ``(instructions, labels)``.

    Labels end in ``:``; ``RJMP``/``BRxx`` accept a label or ``+k``/``-k``;
    ``CALL``/``JMP`` accept a label, a symbol from ``symbols`` or a number.
    Relative label references are resolved after the whole text is read.
    """
    symbols = symbols or {}
    pending = []  # (index, kind, label, line)
    instrs: list = []
    labels: dict = {}
    address = 0
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split(";", 1)[0].split("//", 1)[0].strip()
        if not line:
            continue
        while True:
            m = re.match(r"^([A-Za-z_.][\w.]*):\s*(.*)$", line)
            if not m:
                break
            labels[m.group(1)] = address
            line = m.group(2).strip()
        if not line:
            continue
        mnem, _, rest = line.partition(" ")
        mnem = mnem.upper()
        args = [a.strip() for a in rest.split(",")] if rest.strip() else []
        try:
            instr, ref = _parse_one(mnem, args, symbols)
        except (KeyError, ValueError, IndexError) as exc:
            raise AsmSyntaxError(f"cannot parse {raw.strip()!r}: {exc}", lineno) from None
        if ref is not None:
            pending.append((len(instrs), address, ref, lineno))
        instrs.append(instr)
        address += word_size(instr)
    for idx, addr, ref, lineno in pending:
        if ref not in labels:
            raise AsmSyntaxError(f"undefined label {ref!r}", lineno)
        old = instrs[idx]
        if old.opcode in (NativeOpcode.JMP, NativeOpcode.CALL):
            instrs[idx] = NativeInstruction(old.opcode, target=labels[ref])
        else:
            k = labels[ref] - (addr + 1)
            if old.opcode is NativeOpcode.RJMP:
                instrs[idx] = NativeInstruction(NativeOpcode.RJMP, imm=k)
            else:
                instrs[idx] = NativeInstruction(NativeOpcode.BR_COND, cond=old.cond, imm=k)
    return instrs, labels


def _reg(a: str) -> int:
    m = re.fullmatch(_REG, a.strip(), re.I)
    if not m:
        raise ValueError(f"bad register {a!r}")
    return int(m.group(1))


def _num(a: str) -> int:
    return int(a.strip(), 0)


_BR_ALIASES = {"BREQ": "EQ", "BRNE": "NE", "BRLT": "LT_S", "BRGE": "GE_S", "BRLO": "LT_U",
               "BRSH": "GE_U", "BRPL": "PL", "BRMI": "MI"}


def _parse_one(mnem: str, args: list, symbols: dict):
    N = NativeOpcode
    if mnem in _BR_ALIASES or mnem.startswith("BR") and mnem[2:] in BranchCondition.__members__:
        cond = BranchCondition[_BR_ALIASES.get(mnem, mnem[2:])]
        a = args[0]
        if re.fullmatch(r"[+-]\d+", a):
            return NativeInstruction(N.BR_COND, cond=cond, imm=int(a)), None
        return NativeInstruction(N.BR_COND, cond=cond, imm=0), a
    if mnem == "RJMP":
        a = args[0]
        if re.fullmatch(r"[+-]\d+", a):
            return NativeInstruction(N.RJMP, imm=int(a)), None
        return NativeInstruction(N.RJMP, imm=0), a
    if mnem in ("JMP", "CALL"):
        a = args[0]
        if a in symbols:
            return NativeInstruction(N[mnem], target=symbols[a]), None
        try:
            return NativeInstruction(N[mnem], target=_num(a)), None
        except ValueError:
            return NativeInstruction(N[mnem], target=0), a
    if mnem == "LD":
        m = re.fullmatch(r"(-?)([XYZ])(\+?)", args[1].strip().upper())
        if not m or (m.group(1) and m.group(3)):
            raise ValueError(f"bad LD operand {args[1]!r}")
        if m.group(1):
            return NativeInstruction(N.LD_DEC, rd=_reg(args[0]), ptr=m.group(2)), None
        if m.group(3):
            return NativeInstruction(N.LD_INC, rd=_reg(args[0]), ptr=m.group(2)), None
        return NativeInstruction(N.LDD, rd=_reg(args[0]), ptr=m.group(2), displacement=0), None
    if mnem == "ST":
        m = re.fullmatch(r"(-?)([XYZ])(\+?)", args[0].strip().upper())
        if not m or (m.group(1) and m.group(3)):
            raise ValueError(f"bad ST operand {args[0]!r}")
        if m.group(1):
            return NativeInstruction(N.ST_DEC, rs=_reg(args[1]), ptr=m.group(2)), None
        if m.group(3):
            return NativeInstruction(N.ST_INC, rs=_reg(args[1]), ptr=m.group(2)), None
        return NativeInstruction(N.STD, rs=_reg(args[1]), ptr=m.group(2), displacement=0), None
    if mnem == "LDD":
        m = re.fullmatch(r"([YZ])\+(\d+)", args[1].strip().upper())
        return NativeInstruction(N.LDD, rd=_reg(args[0]), ptr=m.group(1), displacement=int(m.group(2))), None
    if mnem == "STD":
        m = re.fullmatch(r"([YZ])\+(\d+)", args[0].strip().upper())
        return NativeInstruction(N.STD, rs=_reg(args[1]), ptr=m.group(1), displacement=int(m.group(2))), None
    if mnem in ("ADIW", "SBIW"):
        a0 = args[0].strip().upper()
        rd = {"X": 26, "Y": 28, "Z": 30}.get(a0)
        if rd is None:
            rd = _reg(a0)
        return NativeInstruction(N[mnem], rd=rd, imm=_num(args[1])), None
    if mnem == "LDI":
        return NativeInstruction(N.LDI, rd=_reg(args[0]), imm=_num(args[1]) & 0xFF), None
    op = N[mnem]
    shape = OPERAND_SHAPE[op]
    if shape == ("rd",):
        return NativeInstruction(op, rd=_reg(args[0])), None
    if shape == ("rd", "rs"):
        return NativeInstruction(op, rd=_reg(args[0]), rs=_reg(args[1])), None
    if shape == ():
        return NativeInstruction(op), None
    raise ValueError(f"unsupported mnemonic {mnem}")
