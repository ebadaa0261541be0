"""In-memory representation of infusions, methods and value tags."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Optional

from .opcodes import ARRAY_LOADS, ARRAY_STORES, ELEMENT_TYPE, Op, TagUse

SLOTS = {"S": 1, "I": 2, "A": 0}


class TagType(enum.IntEnum):
    LOCAL = 0
    STATIC = 1
    CONSTANT = 2


class DataType(enum.IntEnum):
    SHORT = 0
    INT = 1
    REF = 2


_TYPE_LETTER = {TagType.LOCAL: "L", TagType.STATIC: "G", TagType.CONSTANT: "C"}
_DATA_LETTER = {DataType.SHORT: "S", DataType.INT: "I", DataType.REF: "A"}


@dataclass(frozen=True)
class ValueTag:
    """Identifies what a register holds: (type, datatype, number).

    For INT variables each 16-bit half gets its own tag; ``number`` is the
    slot number of that half.  Constants are tagged by their 16-bit value.
    """

    tag_type: TagType
    datatype: DataType
    number: int

    def __post_init__(self):
        if not 0 <= self.number < 4096:
            raise ValueError(f"tag number {self.number} outside 0..4095")

    @property
    def packed(self) -> int:
        return (int(self.tag_type) << 14) | (int(self.datatype) << 12) | self.number

    @classmethod
    def unpack(cls, value: int) -> "ValueTag":
        return cls(TagType(value >> 14), DataType((value >> 12) & 3), value & 0xFFF)

    @property
    def key(self):
        """Conflict key: two tags naming the same storage share it."""
        return (self.tag_type, self.number)

    def __str__(self) -> str:
        return f"{_TYPE_LETTER[self.tag_type]}{_DATA_LETTER[self.datatype]}{self.number}"

    @classmethod
    def parse(cls, text: str) -> "ValueTag":
        t = {v: k for k, v in _TYPE_LETTER.items()}[text[0]]
        d = {v: k for k, v in _DATA_LETTER.items()}[text[1]]
        return cls(t, d, int(text[2:]))


@dataclass(frozen=True)
class LoopVar:
    """A local variable referenced inside a marked loop."""

    datatype: DataType      # SHORT or INT
    slot: int               # first local slot
    frequency: int = 0

    @property
    def tags(self) -> tuple:
        """Tags of the 16-bit halves, low half first."""
        if self.datatype is DataType.INT:
            return (ValueTag(TagType.LOCAL, DataType.INT, self.slot),
                    ValueTag(TagType.LOCAL, DataType.INT, self.slot + 1))
        return (ValueTag(TagType.LOCAL, DataType.SHORT, self.slot),)

    @property
    def name(self) -> str:
        return f"L{_DATA_LETTER[self.datatype]}{self.slot}"

    @classmethod
    def parse(cls, text: str, frequency: int = 0) -> "LoopVar":
        if text[0] != "L" or text[1] not in "SI":
            raise ValueError(f"bad loop variable {text!r}")
        return cls(DataType.SHORT if text[1] == "S" else DataType.INT, int(text[2:]), frequency)


@dataclass(frozen=True)
class MarkLoop:
    """Payload of a MARKLOOP instruction.

    A begin marker lists the loop's variables by descending frequency and
    those live at entry; an end marker lists those live at exit.
    """

    begin: bool
    variables: tuple = ()       # LoopVar, begin only
    live: tuple = ()            # variable names ("LS0"), entry or exit

    def __str__(self) -> str:
        if self.begin:
            tags = ",".join(f"{v.name}:{v.frequency}" for v in self.variables)
            return f"BEGIN tags={tags} in={','.join(self.live)}"
        return f"END out={','.join(self.live)}"


@dataclass(frozen=True)
class Instr:
    op: Op
    args: tuple = ()

    def __str__(self) -> str:
        from .assembly import format_instr
        return format_instr(self)

    @property
    def info(self):
        return self.op.info


@dataclass
class ClassDef:
    name: str
    int_fields: int = 0          # own int field slots
    ref_fields: int = 0          # own ref fields
    parent: Optional[str] = None
    final: bool = False


@dataclass
class MethodDef:
    name: str
    params: str = ""             # parameter value types, e.g. "SIA"
    returns: str = "V"           # S, I, A or V
    local_int_slots: int = 0
    local_ref_slots: int = 0
    lightweight: bool = False
    body: list = field(default_factory=list)
    max_int_stack: int = 0
    max_ref_stack: int = 0
    lw_frame_reserve: int = 0    # int slots reserved for lightweight callees
    lw_ref_reserve: int = 0      # ref-stack entries reserved for them
    line: int = field(default=0, compare=False)

    @property
    def param_slots(self) -> int:
        return sum(SLOTS[t] for t in self.params)

    @property
    def param_refs(self) -> int:
        return self.params.count("A")

    @property
    def brtarget_count(self) -> int:
        return sum(1 for i in self.body if i.op is Op.BRTARGET)

    @property
    def descriptor(self) -> str:
        return f"({self.params}){self.returns}"

    @property
    def handwritten_lightweight(self) -> bool:
        return bool(self.body) and self.body[0].op is Op.LW_PARAMETER

    @property
    def nested(self) -> bool:
        """Lightweight method that calls anything (keeps its return address in a local)."""
        return any(i.op in (Op.INVOKESTATIC, Op.INVOKELIGHT) for i in self.body)

    def copy(self, **changes) -> "MethodDef":
        changes.setdefault("body", list(self.body))
        return replace(self, **changes)


@dataclass
class Infusion:
    methods: list = field(default_factory=list)
    static_int_slots: int = 0
    static_ref_slots: int = 0
    classes: list = field(default_factory=list)
    entry: int = 0

    def method(self, name: str) -> MethodDef:
        for m in self.methods:
            if m.name == name:
                return m
        raise KeyError(f"unknown method {name!r}")

    def method_index(self, name: str) -> int:
        for i, m in enumerate(self.methods):
            if m.name == name:
                return i
        raise KeyError(f"unknown method {name!r}")

    def class_def(self, name: str) -> ClassDef:
        for c in self.classes:
            if c.name == name:
                return c
        raise KeyError(f"unknown class {name!r}")

    def class_index(self, name: str) -> int:
        for i, c in enumerate(self.classes):
            if c.name == name:
                return i
        raise KeyError(f"unknown class {name!r}")

    def class_chain(self, name: str) -> list:
        """Class and its ancestors, root first."""
        chain = []
        seen = set()
        while name is not None:
            if name in seen:
                raise ValueError(f"class hierarchy cycle at {name!r}")
            seen.add(name)
            c = self.class_def(name)
            chain.append(c)
            name = c.parent
        return chain[::-1]

    def instance_int_slots(self, name: str) -> int:
        return sum(c.int_fields for c in self.class_chain(name))

    def instance_ref_fields(self, name: str) -> int:
        return sum(c.ref_fields for c in self.class_chain(name))

    def copy(self) -> "Infusion":
        return Infusion([m.copy() for m in self.methods], self.static_int_slots,
                        self.static_ref_slots, [replace(c) for c in self.classes], self.entry)

    @property
    def entry_method(self) -> MethodDef:
        return self.methods[self.entry]


def stack_effect(instr: Instr, infusion: Optional[Infusion] = None):
    """Return ``(ins, outs)`` value-type tuples (bottom to top)."""
    op = instr.op
    name = op.name
    if name in ARRAY_LOADS:
        idx = "S" if instr.args[0] == 16 else "I"
        return ("A", idx), (ELEMENT_TYPE[ARRAY_LOADS[name]],)
    if name in ARRAY_STORES:
        idx = "S" if instr.args[0] == 16 else "I"
        return ("A", idx, ELEMENT_TYPE[ARRAY_STORES[name]]), ()
    if op in (Op.INVOKESTATIC, Op.INVOKELIGHT):
        if infusion is None:
            raise ValueError("invoke stack effect needs the infusion")
        callee = infusion.method(instr.args[0])
        outs = () if callee.returns == "V" else (callee.returns,)
        return tuple(callee.params), outs
    if op is Op.LW_PARAMETER:
        return (), (instr.args[0],)
    return op.info.ins, op.info.outs


def instr_tags(instr: Instr) -> tuple:
    """Value tags the instruction loads/stores/increments, low half first.

    Constants outside 0..4095 carry no tag.
    """
    op = instr.op
    use = op.info.tag_use
    if use is None:
        return ()
    if op in (Op.SLOAD, Op.SSTORE):
        return (ValueTag(TagType.LOCAL, DataType.SHORT, instr.args[0]),)
    if op in (Op.ILOAD, Op.ISTORE):
        n = instr.args[0]
        return (ValueTag(TagType.LOCAL, DataType.INT, n), ValueTag(TagType.LOCAL, DataType.INT, n + 1))
    if op is Op.SINC:
        return (ValueTag(TagType.LOCAL, DataType.SHORT, instr.args[0]),)
    if op is Op.IINC:
        n = instr.args[0]
        return (ValueTag(TagType.LOCAL, DataType.INT, n), ValueTag(TagType.LOCAL, DataType.INT, n + 1))
    if op in (Op.GETSTATIC_S, Op.PUTSTATIC_S):
        return (ValueTag(TagType.STATIC, DataType.SHORT, instr.args[0]),)
    if op in (Op.GETSTATIC_I, Op.PUTSTATIC_I):
        n = instr.args[0]
        return (ValueTag(TagType.STATIC, DataType.INT, n), ValueTag(TagType.STATIC, DataType.INT, n + 1))
    if op in (Op.SCONST, Op.BIPUSH, Op.SIPUSH):
        v = instr.args[0] & 0xFFFF
        return (const_tag(v),)
    if op is Op.ICONST:
        v = instr.args[0] & 0xFFFFFFFF
        return (const_tag(v & 0xFFFF), const_tag(v >> 16))
    return ()


def const_tag(half: int) -> Optional[ValueTag]:
    if half < 4096:
        return ValueTag(TagType.CONSTANT, DataType.SHORT, half)
    return None


def loop_var_of(instr: Instr) -> Optional[LoopVar]:
    """Local variable a load/store/inc refers to, for mark-loop analysis."""
    op = instr.op
    if op in (Op.SLOAD, Op.SSTORE, Op.SINC):
        return LoopVar(DataType.SHORT, instr.args[0])
    if op in (Op.ILOAD, Op.ISTORE, Op.IINC):
        return LoopVar(DataType.INT, instr.args[0])
    return None


def local_slot_effect(instr: Instr):
    """(slots read, slots written) of int local slots, for liveness."""
    op = instr.op
    if op in (Op.SLOAD,):
        return {instr.args[0]}, set()
    if op is Op.ILOAD:
        n = instr.args[0]
        return {n, n + 1}, set()
    if op is Op.SSTORE:
        return set(), {instr.args[0]}
    if op is Op.ISTORE:
        n = instr.args[0]
        return set(), {n, n + 1}
    if op is Op.SINC:
        return {instr.args[0]}, {instr.args[0]}
    if op is Op.IINC:
        n = instr.args[0]
        return {n, n + 1}, {n, n + 1}
    return set(), set()


def is_load_store_inc(instr: Instr) -> bool:
    return instr.op.info.tag_use in (TagUse.LOAD, TagUse.STORE, TagUse.INC)
