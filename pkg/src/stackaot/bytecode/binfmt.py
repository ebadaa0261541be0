"""Binary infusion format (``.sinf``).

Little-endian layout::

    magic "SAOT" | version u8 | static ints u16 | static refs u16 | entry u16
    class count u16, then per class:
        name (u8 length + utf-8) | ints u16 | refs u16 | parent i16 | final u8
    method count u16, then per method (the method table):
        name | descriptor | flags u8 | int locals u16 | ref locals u16
        max int stack u16 | max ref stack u16 | lw reserve u16 | lw ref reserve u16
        brtarget count u16 | lw parameter count u8 | body offset u32 | body length u32
    method bodies

Each instruction is an opcode byte followed by its operands.  LW_PARAMETER
instructions are never written; their count lives in the method table and
they are regenerated from the descriptor on read.
"""

from __future__ import annotations

import io
import struct

from .model import ClassDef, DataType, Infusion, Instr, LoopVar, MarkLoop, MethodDef, ValueTag
from .opcodes import Op, Operand

MAGIC = b"SAOT"
VERSION = 1
OPCODES = list(Op)
OPCODE_INDEX = {op: i for i, op in enumerate(OPCODES)}
_KINDS = "BSIA"


class FormatError(ValueError):
    pass


def _wstr(buf, s: str) -> None:
    data = s.encode()
    buf.write(struct.pack("<B", len(data)))
    buf.write(data)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, fmt: str):
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.data):
            raise FormatError(f"truncated stream at offset {self.pos}")
        out = struct.unpack_from(fmt, self.data, self.pos)
        self.pos += size
        return out if len(out) > 1 else out[0]

    def string(self) -> str:
        n = self.take("<B")
        if self.pos + n > len(self.data):
            raise FormatError(f"truncated stream at offset {self.pos}")
        s = self.data[self.pos:self.pos + n].decode()
        self.pos += n
        return s


def _encode_instr(buf, instr: Instr, inf: Infusion) -> None:
    op = instr.op
    buf.write(struct.pack("<B", OPCODE_INDEX[op]))
    kinds = op.info.operands
    if not kinds:
        return
    kind = kinds[0]
    a = instr.args
    if kind in (Operand.LOCAL, Operand.STATIC, Operand.AMOUNT, Operand.LABEL):
        buf.write(struct.pack("<H", a[0]))
    elif kind is Operand.VALUE:
        buf.write(struct.pack("<i", a[0]))
    elif kind is Operand.INC:
        buf.write(struct.pack("<Hh", a[0], a[1]))
    elif kind is Operand.METHOD:
        buf.write(struct.pack("<H", inf.method_index(a[0])))
    elif kind is Operand.FIELD:
        buf.write(struct.pack("<HH", inf.class_index(a[0]), a[1]))
    elif kind is Operand.CLASS:
        buf.write(struct.pack("<H", inf.class_index(a[0])))
    elif kind is Operand.KIND:
        buf.write(struct.pack("<B", _KINDS.index(a[0])))
    elif kind is Operand.WIDTH:
        buf.write(struct.pack("<B", a[0]))
    elif kind is Operand.MARK:
        mark = a[0]
        # count, then (packed low-half tag, frequency, live flag) triples
        if mark.begin:
            live = set(mark.live)
            buf.write(struct.pack("<BB", 1, len(mark.variables)))
            for v in mark.variables:
                buf.write(struct.pack("<HHB", v.tags[0].packed, v.frequency, v.name in live))
        else:
            buf.write(struct.pack("<BB", 0, len(mark.live)))
            for name in mark.live:
                buf.write(struct.pack("<H", LoopVar.parse(name).tags[0].packed))
    else:
        raise FormatError(f"cannot encode operand kind {kind}")


def _var_from_tag(packed: int, freq: int = 0) -> LoopVar:
    tag = ValueTag.unpack(packed)
    return LoopVar(DataType(tag.datatype), tag.number, freq)


def _decode_instr(r: _Reader, names: list, classes: list) -> Instr:
    code = r.take("<B")
    if code >= len(OPCODES):
        raise FormatError(f"unknown opcode byte {code} at offset {r.pos - 1}")
    op = OPCODES[code]
    kinds = op.info.operands
    if not kinds:
        return Instr(op)
    kind = kinds[0]
    if kind in (Operand.LOCAL, Operand.STATIC, Operand.AMOUNT, Operand.LABEL):
        return Instr(op, (r.take("<H"),))
    if kind is Operand.VALUE:
        return Instr(op, (r.take("<i"),))
    if kind is Operand.INC:
        return Instr(op, tuple(r.take("<Hh")))
    if kind is Operand.METHOD:
        return Instr(op, (names[r.take("<H")],))
    if kind is Operand.FIELD:
        ci, k = r.take("<HH")
        return Instr(op, (classes[ci], k))
    if kind is Operand.CLASS:
        return Instr(op, (classes[r.take("<H")],))
    if kind is Operand.KIND:
        return Instr(op, (_KINDS[r.take("<B")],))
    if kind is Operand.WIDTH:
        return Instr(op, (r.take("<B"),))
    if kind is Operand.MARK:
        begin, count = r.take("<BB")
        if begin:
            variables, live = [], []
            for _ in range(count):
                packed, freq, flag = r.take("<HHB")
                v = _var_from_tag(packed, freq)
                variables.append(v)
                if flag:
                    live.append(v.name)
            return Instr(op, (MarkLoop(True, tuple(variables), tuple(live)),))
        live = tuple(_var_from_tag(r.take("<H")).name for _ in range(count))
        return Instr(op, (MarkLoop(False, (), live),))
    raise FormatError(f"cannot decode operand kind {kind}")


def write_infusion(inf: Infusion) -> bytes:
    bodies = []
    lw_counts = []
    for m in inf.methods:
        b = io.BytesIO()
        n_lw = 0
        for instr in m.body:
            if instr.op is Op.LW_PARAMETER:
                n_lw += 1
                continue
            _encode_instr(b, instr, inf)
        bodies.append(b.getvalue())
        lw_counts.append(n_lw)
    head = io.BytesIO()
    head.write(MAGIC)
    head.write(struct.pack("<BHHH", VERSION, inf.static_int_slots, inf.static_ref_slots, inf.entry))
    head.write(struct.pack("<H", len(inf.classes)))
    for c in inf.classes:
        _wstr(head, c.name)
        parent = inf.class_index(c.parent) if c.parent else -1
        head.write(struct.pack("<HHhB", c.int_fields, c.ref_fields, parent, c.final))
    head.write(struct.pack("<H", len(inf.methods)))
    table = []
    for m, n_lw in zip(inf.methods, lw_counts):
        t = io.BytesIO()
        _wstr(t, m.name)
        _wstr(t, m.descriptor)
        t.write(struct.pack("<BHHHHHHHB", int(m.lightweight), m.local_int_slots, m.local_ref_slots,
                            m.max_int_stack, m.max_ref_stack, m.lw_frame_reserve, m.lw_ref_reserve,
                            m.brtarget_count, n_lw))
        table.append(t.getvalue())
    table_size = sum(len(t) + 8 for t in table)
    offset = head.tell() + table_size
    for t, body in zip(table, bodies):
        head.write(t)
        head.write(struct.pack("<II", offset, len(body)))
        offset += len(body)
    for body in bodies:
        head.write(body)
    return head.getvalue()


def read_infusion(data: bytes) -> Infusion:
    if data[:4] != MAGIC:
        raise FormatError("bad magic: not an infusion file")
    r = _Reader(data)
    r.pos = 4
    version = r.take("<B")
    if version != VERSION:
        raise FormatError(f"unsupported infusion version {version}")
    s_ints, s_refs, entry = r.take("<HHH")
    n_classes = r.take("<H")
    raw_classes = []
    for _ in range(n_classes):
        name = r.string()
        ints, refs, parent, final = r.take("<HHhB")
        raw_classes.append((name, ints, refs, parent, final))
    class_names = [c[0] for c in raw_classes]
    classes = [ClassDef(n, i, rf, class_names[p] if p >= 0 else None, bool(f))
               for n, i, rf, p, f in raw_classes]
    n_methods = r.take("<H")
    entries = []
    for _ in range(n_methods):
        name = r.string()
        desc = r.string()
        fields = r.take("<BHHHHHHHB")
        off, length = r.take("<II")
        entries.append((name, desc, fields, off, length))
    names = [e[0] for e in entries]
    methods = []
    for name, desc, fields, off, length in entries:
        flags, li, lr, mi, mr, res, rres, _brt, n_lw = fields
        params, ret = desc[1:desc.index(")")], desc[desc.index(")") + 1:]
        if off + length > len(data):
            raise FormatError(f"truncated body for method {name!r}")
        body = [Instr(Op.LW_PARAMETER, (t,)) for t in params[:n_lw]]
        if n_lw and n_lw != len(params):
            raise FormatError(f"lightweight parameter count mismatch in {name!r}")
        br = _Reader(data[:off + length])
        br.pos = off
        while br.pos < off + length:
            body.append(_decode_instr(br, names, class_names))
        methods.append(MethodDef(name, params, ret, li, lr, bool(flags & 1), body, mi, mr, res, rres))
    return Infusion(methods, s_ints, s_refs, classes, entry)
