"""Stack bytecode opcode table.

Each opcode records its operand kinds and its stack signature in value
types: ``S`` (16-bit short, one slot), ``I`` (32-bit int, two slots) and
``A`` (reference, kept on the separate reference stack).  Signatures that
depend on operands (invokes, array index width, LW_PARAMETER) are computed
in :func:`stack_effect`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional


class Operand(enum.Enum):
    LOCAL = "local"        # local slot number
    VALUE = "value"        # signed constant
    AMOUNT = "amount"      # shift amount 0..31
    INC = "inc"            # (local, signed delta)
    LABEL = "label"        # branch-target id
    METHOD = "method"      # method name
    FIELD = "field"        # (class name, field index)
    CLASS = "class"        # class name
    STATIC = "static"      # static slot number
    KIND = "kind"          # array element kind B/S/I/A
    WIDTH = "width"        # array index width 16 or 32
    TYPE = "type"          # value type S/I/A
    MARK = "mark"          # mark-loop payload


class TagUse(enum.Enum):
    LOAD = "load"
    STORE = "store"
    INC = "inc"


@dataclass(frozen=True)
class OpInfo:
    operands: tuple = ()
    ins: tuple = ()
    outs: tuple = ()
    branch: bool = False
    cond: Optional[str] = None      # logical condition for branches
    terminator: bool = False        # control never falls through
    tag_use: Optional[TagUse] = None
    family: str = "other"           # executed-instruction class for reports


_TABLE = {
    # locals
    "SLOAD": OpInfo((Operand.LOCAL,), (), ("S",), tag_use=TagUse.LOAD, family="load/store"),
    "ILOAD": OpInfo((Operand.LOCAL,), (), ("I",), tag_use=TagUse.LOAD, family="load/store"),
    "ALOAD": OpInfo((Operand.LOCAL,), (), ("A",), family="load/store"),
    "SSTORE": OpInfo((Operand.LOCAL,), ("S",), (), tag_use=TagUse.STORE, family="load/store"),
    "ISTORE": OpInfo((Operand.LOCAL,), ("I",), (), tag_use=TagUse.STORE, family="load/store"),
    "ASTORE": OpInfo((Operand.LOCAL,), ("A",), (), family="load/store"),
    # constants
    "SCONST": OpInfo((Operand.VALUE,), (), ("S",), tag_use=TagUse.LOAD, family="constant"),
    "BIPUSH": OpInfo((Operand.VALUE,), (), ("S",), tag_use=TagUse.LOAD, family="constant"),
    "SIPUSH": OpInfo((Operand.VALUE,), (), ("S",), tag_use=TagUse.LOAD, family="constant"),
    "ICONST": OpInfo((Operand.VALUE,), (), ("I",), tag_use=TagUse.LOAD, family="constant"),
    "ACONST_NULL": OpInfo((), (), ("A",), family="constant"),
    # arithmetic
    "SADD": OpInfo((), ("S", "S"), ("S",), family="math"),
    "SSUB": OpInfo((), ("S", "S"), ("S",), family="math"),
    "SMUL": OpInfo((), ("S", "S"), ("S",), family="math"),
    "SDIV": OpInfo((), ("S", "S"), ("S",), family="math"),
    "SREM": OpInfo((), ("S", "S"), ("S",), family="math"),
    "IADD": OpInfo((), ("I", "I"), ("I",), family="math"),
    "ISUB": OpInfo((), ("I", "I"), ("I",), family="math"),
    "IMUL": OpInfo((), ("I", "I"), ("I",), family="math"),
    "IDIV": OpInfo((), ("I", "I"), ("I",), family="math"),
    "IREM": OpInfo((), ("I", "I"), ("I",), family="math"),
    "SNEG": OpInfo((), ("S",), ("S",), family="math"),
    "INEG": OpInfo((), ("I",), ("I",), family="math"),
    "SINC": OpInfo((Operand.INC,), (), (), tag_use=TagUse.INC, family="math"),
    "IINC": OpInfo((Operand.INC,), (), (), tag_use=TagUse.INC, family="math"),
    "SIMUL": OpInfo((), ("S", "S"), ("I",), family="math"),
    # bit logic
    "SAND": OpInfo((), ("S", "S"), ("S",), family="bit logic"),
    "SOR": OpInfo((), ("S", "S"), ("S",), family="bit logic"),
    "SXOR": OpInfo((), ("S", "S"), ("S",), family="bit logic"),
    "IAND": OpInfo((), ("I", "I"), ("I",), family="bit logic"),
    "IOR": OpInfo((), ("I", "I"), ("I",), family="bit logic"),
    "IXOR": OpInfo((), ("I", "I"), ("I",), family="bit logic"),
    # shifts
    "SSHL": OpInfo((), ("S", "S"), ("S",), family="bit shift"),
    "SSHR": OpInfo((), ("S", "S"), ("S",), family="bit shift"),
    "SUSHR": OpInfo((), ("S", "S"), ("S",), family="bit shift"),
    "ISHL": OpInfo((), ("I", "I"), ("I",), family="bit shift"),
    "ISHR": OpInfo((), ("I", "I"), ("I",), family="bit shift"),
    "IUSHR": OpInfo((), ("I", "I"), ("I",), family="bit shift"),
    "SSHL_CONST": OpInfo((Operand.AMOUNT,), ("S",), ("S",), family="bit shift"),
    "SSHR_CONST": OpInfo((Operand.AMOUNT,), ("S",), ("S",), family="bit shift"),
    "SUSHR_CONST": OpInfo((Operand.AMOUNT,), ("S",), ("S",), family="bit shift"),
    "ISHL_CONST": OpInfo((Operand.AMOUNT,), ("I",), ("I",), family="bit shift"),
    "ISHR_CONST": OpInfo((Operand.AMOUNT,), ("I",), ("I",), family="bit shift"),
    "IUSHR_CONST": OpInfo((Operand.AMOUNT,), ("I",), ("I",), family="bit shift"),
    # conversions and stack shuffles
    "S2I": OpInfo((), ("S",), ("I",)),
    "I2S": OpInfo((), ("I",), ("S",)),
    "SDUP": OpInfo((), ("S",), ("S", "S")),
    "SPOP": OpInfo((), ("S",), ()),
    "IPOP": OpInfo((), ("I",), ()),
    # arrays; the index type depends on the WIDTH operand
    "BALOAD": OpInfo((Operand.WIDTH,), family="load/store"),
    "SALOAD": OpInfo((Operand.WIDTH,), family="load/store"),
    "IALOAD": OpInfo((Operand.WIDTH,), family="load/store"),
    "AALOAD": OpInfo((Operand.WIDTH,), family="load/store"),
    "BASTORE": OpInfo((Operand.WIDTH,), family="load/store"),
    "SASTORE": OpInfo((Operand.WIDTH,), family="load/store"),
    "IASTORE": OpInfo((Operand.WIDTH,), family="load/store"),
    "AASTORE": OpInfo((Operand.WIDTH,), family="load/store"),
    "ARRAYLENGTH": OpInfo((), ("A",), ("S",), family="load/store"),
    # object fields
    "GETFIELD_S": OpInfo((Operand.FIELD,), ("A",), ("S",), family="load/store"),
    "GETFIELD_I": OpInfo((Operand.FIELD,), ("A",), ("I",), family="load/store"),
    "GETFIELD_A": OpInfo((Operand.FIELD,), ("A",), ("A",), family="load/store"),
    "GETFIELD_A_FIXED": OpInfo((Operand.FIELD,), ("A",), ("A",), family="load/store"),
    "PUTFIELD_S": OpInfo((Operand.FIELD,), ("A", "S"), (), family="load/store"),
    "PUTFIELD_I": OpInfo((Operand.FIELD,), ("A", "I"), (), family="load/store"),
    "PUTFIELD_A": OpInfo((Operand.FIELD,), ("A", "A"), (), family="load/store"),
    "PUTFIELD_A_FIXED": OpInfo((Operand.FIELD,), ("A", "A"), (), family="load/store"),
    # statics
    "GETSTATIC_S": OpInfo((Operand.STATIC,), (), ("S",), tag_use=TagUse.LOAD, family="load/store"),
    "GETSTATIC_I": OpInfo((Operand.STATIC,), (), ("I",), tag_use=TagUse.LOAD, family="load/store"),
    "GETSTATIC_A": OpInfo((Operand.STATIC,), (), ("A",), family="load/store"),
    "PUTSTATIC_S": OpInfo((Operand.STATIC,), ("S",), (), tag_use=TagUse.STORE, family="load/store"),
    "PUTSTATIC_I": OpInfo((Operand.STATIC,), ("I",), (), tag_use=TagUse.STORE, family="load/store"),
    "PUTSTATIC_A": OpInfo((Operand.STATIC,), ("A",), (), family="load/store"),
    # branches
    "IF_SCMPEQ": OpInfo((Operand.LABEL,), ("S", "S"), (), branch=True, cond="EQ", family="branch"),
    "IF_SCMPNE": OpInfo((Operand.LABEL,), ("S", "S"), (), branch=True, cond="NE", family="branch"),
    "IF_SCMPLT": OpInfo((Operand.LABEL,), ("S", "S"), (), branch=True, cond="LT", family="branch"),
    "IF_SCMPGE": OpInfo((Operand.LABEL,), ("S", "S"), (), branch=True, cond="GE", family="branch"),
    "IF_SCMPGT": OpInfo((Operand.LABEL,), ("S", "S"), (), branch=True, cond="GT", family="branch"),
    "IF_SCMPLE": OpInfo((Operand.LABEL,), ("S", "S"), (), branch=True, cond="LE", family="branch"),
    "IF_ICMPEQ": OpInfo((Operand.LABEL,), ("I", "I"), (), branch=True, cond="EQ", family="branch"),
    "IF_ICMPNE": OpInfo((Operand.LABEL,), ("I", "I"), (), branch=True, cond="NE", family="branch"),
    "IF_ICMPLT": OpInfo((Operand.LABEL,), ("I", "I"), (), branch=True, cond="LT", family="branch"),
    "IF_ICMPGE": OpInfo((Operand.LABEL,), ("I", "I"), (), branch=True, cond="GE", family="branch"),
    "IF_ICMPGT": OpInfo((Operand.LABEL,), ("I", "I"), (), branch=True, cond="GT", family="branch"),
    "IF_ICMPLE": OpInfo((Operand.LABEL,), ("I", "I"), (), branch=True, cond="LE", family="branch"),
    "IFEQ": OpInfo((Operand.LABEL,), ("S",), (), branch=True, cond="EQ", family="branch"),
    "IFNE": OpInfo((Operand.LABEL,), ("S",), (), branch=True, cond="NE", family="branch"),
    "IFLT": OpInfo((Operand.LABEL,), ("S",), (), branch=True, cond="LT", family="branch"),
    "IFGE": OpInfo((Operand.LABEL,), ("S",), (), branch=True, cond="GE", family="branch"),
    "IFGT": OpInfo((Operand.LABEL,), ("S",), (), branch=True, cond="GT", family="branch"),
    "IFLE": OpInfo((Operand.LABEL,), ("S",), (), branch=True, cond="LE", family="branch"),
    "GOTO": OpInfo((Operand.LABEL,), (), (), branch=True, terminator=True, family="branch"),
    # markers
    "BRTARGET": OpInfo((Operand.LABEL,), family="marker"),
    "MARKLOOP": OpInfo((Operand.MARK,), family="marker"),
    "LW_PARAMETER": OpInfo((Operand.TYPE,), family="marker"),
    # calls and returns
    "INVOKESTATIC": OpInfo((Operand.METHOD,), family="invoke"),
    "INVOKELIGHT": OpInfo((Operand.METHOD,), family="invoke"),
    "SRETURN": OpInfo((), ("S",), (), terminator=True, family="invoke"),
    "IRETURN": OpInfo((), ("I",), (), terminator=True, family="invoke"),
    "ARETURN": OpInfo((), ("A",), (), terminator=True, family="invoke"),
    "RETURN": OpInfo((), (), (), terminator=True, family="invoke"),
    # allocation
    "NEW": OpInfo((Operand.CLASS,), (), ("A",)),
    "NEWARRAY": OpInfo((Operand.KIND,), ("S",), ("A",)),
}


Op = enum.Enum("Op", [(name, name) for name in _TABLE])
Op.info = property(lambda self: _TABLE[self.name])


ARRAY_LOADS = {"BALOAD": "B", "SALOAD": "S", "IALOAD": "I", "AALOAD": "A"}
ARRAY_STORES = {"BASTORE": "B", "SASTORE": "S", "IASTORE": "I", "AASTORE": "A"}
ELEMENT_TYPE = {"B": "S", "S": "S", "I": "I", "A": "A"}
ELEMENT_SIZE = {"B": 1, "S": 2, "I": 4, "A": 2}
KIND_CODE = {"B": 0, "S": 1, "I": 2, "A": 3}

SHIFT_CONST = {
    "SSHL": "SSHL_CONST", "SSHR": "SSHR_CONST", "SUSHR": "SUSHR_CONST",
    "ISHL": "ISHL_CONST", "ISHR": "ISHR_CONST", "IUSHR": "IUSHR_CONST",
}
