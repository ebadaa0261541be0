"""Reference interpreter for stack bytecode (the equivalence oracle).

It shares nothing with the compiler except the data-memory layout, so a
compiled run and an interpreted run of the same program must leave
byte-identical statics and heap.  Operand stack entries are 16-bit halves
exactly as in the compiled code: an int is two entries, high half deeper.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..bytecode.model import Infusion, MethodDef
from ..bytecode.opcodes import ARRAY_LOADS, ARRAY_STORES, ELEMENT_SIZE, Op
from .layout import RAM_SIZE, static_int_addr, static_ref_addr
from .machine import java_div, java_rem
from .memory import Heap, ProgramInput, RunOutcome, Trap, materialise_args, shift_count, to_signed

DEFAULT_MAX_STEPS = 5_000_000


class InterpreterError(RuntimeError):
    pass


@dataclass
class _Frame:
    method: MethodDef
    targets: dict
    locals: list
    refs: list
    stack: list = field(default_factory=list)
    rstack: list = field(default_factory=list)
    pc: int = 0


def _join(lo: int, hi: int) -> int:
    return to_signed(lo | hi << 16, 32)


def _halves(value: int) -> tuple:
    value &= 0xFFFFFFFF
    return value & 0xFFFF, value >> 16


def _shift(kind: str, value: int, count: int, bits: int) -> int:
    mask = (1 << bits) - 1
    if kind == "SHL":
        return (value << count) & mask if count < bits else 0
    if kind == "USHR":
        return (value & mask) >> count if count < bits else 0
    sv = to_signed(value, bits)
    return (sv >> min(count, bits - 1)) & mask


def _stack_form(m: MethodDef) -> bool:
    """Lightweight method that takes its arguments on the operand stack."""
    return m.lightweight and any(i.op is Op.LW_PARAMETER for i in m.body)


class Interpreter:
    def __init__(self, inf: Infusion, ram_size: int = RAM_SIZE,
                 max_steps: int = DEFAULT_MAX_STEPS):
        self.inf = inf
        self.ram_size = ram_size
        self.max_steps = max_steps
        self.methods = {m.name: m for m in inf.methods}
        self.targets = {m.name: {x.args[0]: i for i, x in enumerate(m.body) if x.op is Op.BRTARGET}
                        for m in inf.methods}
        self.class_index = {c.name: i for i, c in enumerate(inf.classes)}
        self.steps = 0

    def _frame(self, m: MethodDef, ints: list, refs: list) -> _Frame:
        f = _Frame(m, self.targets[m.name], [0] * max(m.local_int_slots, 1),
                   [0] * max(m.local_ref_slots, 1))
        if _stack_form(m):
            f.stack = list(ints)
            f.rstack = list(refs)
        else:
            f.locals[:len(ints)] = ints
            f.refs[:len(refs)] = refs
        return f

    @staticmethod
    def _arg_halves(params: str, values: list) -> tuple:
        ints, refs = [], []
        for t, v in zip(params, values):
            if t == "S":
                ints.append(v & 0xFFFF)
            elif t == "I":
                lo, hi = _halves(v)
                ints += [lo, hi]
            else:
                refs.append(v)
        return ints, refs

    def run(self, inp: ProgramInput = ProgramInput()) -> RunOutcome:
        inf = self.inf
        heap = Heap(inf.static_int_slots, inf.static_ref_slots, self.ram_size)
        entry = inf.entry_method
        try:
            args = materialise_args(heap, entry.params, inp)
            ints, refs = self._arg_halves(entry.params, args)
            # an int argument's halves sit as (lo, hi) in locals; the stack
            # form of a lightweight entry would need (hi, lo) order
            if entry.lightweight:
                raise InterpreterError("entry method must not be lightweight")
            value = self._execute(heap, self._frame(entry, ints, refs))
        except Trap as exc:
            return RunOutcome(None, b"", str(exc))
        return RunOutcome(value, heap.state())

    # ------------------------------------------------------------------
    def _execute(self, heap: Heap, frame: _Frame):
        inf = self.inf
        ram = heap.ram
        calls: list = []
        steps = 0
        limit = self.max_steps
        while True:
            m = frame.method
            body = m.body
            st = frame.stack
            rs = frame.rstack
            loc = frame.locals
            instr = body[frame.pc]
            frame.pc += 1
            steps += 1
            if steps > limit:
                raise InterpreterError(f"watchdog: more than {limit} bytecodes")
            op = instr.op
            name = op.name
            a = instr.args
            if op is Op.SLOAD:
                st.append(loc[a[0]])
            elif op is Op.ILOAD:
                st.append(loc[a[0] + 1])
                st.append(loc[a[0]])
            elif op is Op.SSTORE:
                loc[a[0]] = st.pop()
            elif op is Op.ISTORE:
                loc[a[0]] = st.pop()
                loc[a[0] + 1] = st.pop()
            elif op is Op.ALOAD:
                rs.append(frame.refs[a[0]])
            elif op is Op.ASTORE:
                frame.refs[a[0]] = rs.pop()
            elif op in (Op.SCONST, Op.BIPUSH, Op.SIPUSH):
                st.append(a[0] & 0xFFFF)
            elif op is Op.ICONST:
                lo, hi = _halves(a[0])
                st.append(hi)
                st.append(lo)
            elif op is Op.ACONST_NULL:
                rs.append(0)
            elif name in _SHORT_BIN:
                y = st.pop()
                x = st.pop()
                st.append(_SHORT_BIN[name](x, y) & 0xFFFF)
            elif name in _INT_BIN:
                y = _join(st.pop(), st.pop())
                x = _join(st.pop(), st.pop())
                lo, hi = _halves(_INT_BIN[name](x, y))
                st.append(hi)
                st.append(lo)
            elif op is Op.SNEG:
                st.append(-st.pop() & 0xFFFF)
            elif op is Op.INEG:
                lo, hi = _halves(-_join(st.pop(), st.pop()))
                st.append(hi)
                st.append(lo)
            elif op is Op.SIMUL:
                y = to_signed(st.pop(), 16)
                x = to_signed(st.pop(), 16)
                lo, hi = _halves(x * y)
                st.append(hi)
                st.append(lo)
            elif op is Op.SINC:
                loc[a[0]] = (loc[a[0]] + a[1]) & 0xFFFF
            elif op is Op.IINC:
                lo, hi = _halves(_join(loc[a[0]], loc[a[0] + 1]) + a[1])
                loc[a[0]], loc[a[0] + 1] = lo, hi
            elif name in ("SSHL", "SSHR", "SUSHR"):
                cnt = shift_count(st.pop())
                st.append(_shift(name[1:], st.pop(), cnt, 16))
            elif name in ("ISHL", "ISHR", "IUSHR"):
                cnt = shift_count(st.pop())
                st.pop()
                x = st.pop() | st.pop() << 16
                lo, hi = _halves(_shift(name[1:], x, cnt, 32))
                st.append(hi)
                st.append(lo)
            elif name.endswith("_CONST"):
                kind = name[1:-6]
                if name[0] == "S":
                    st.append(_shift(kind, st.pop(), a[0], 16))
                else:
                    x = st.pop() | st.pop() << 16
                    lo, hi = _halves(_shift(kind, x, a[0], 32))
                    st.append(hi)
                    st.append(lo)
            elif op is Op.S2I:
                v = st.pop()
                st.append(0xFFFF if v & 0x8000 else 0)
                st.append(v)
            elif op is Op.I2S:
                v = st.pop()
                st.pop()
                st.append(v)
            elif op is Op.SDUP:
                st.append(st[-1])
            elif op is Op.SPOP:
                st.pop()
            elif op is Op.IPOP:
                st.pop()
                st.pop()
            elif name in ARRAY_LOADS:
                kind = ARRAY_LOADS[name]
                idx = self._index(st, a[0])
                addr = self._element(heap, rs.pop(), idx, kind)
                if kind == "B":
                    st.append(to_signed(ram[addr], 8) & 0xFFFF)
                elif kind == "I":
                    st.append(heap.u16(addr + 2))
                    st.append(heap.u16(addr))
                elif kind == "S":
                    st.append(heap.u16(addr))
                else:
                    rs.append(heap.u16(addr))
            elif name in ARRAY_STORES:
                kind = ARRAY_STORES[name]
                if kind == "A":
                    val = rs.pop()
                elif kind == "I":
                    lo = st.pop()
                    val = lo | st.pop() << 16
                else:
                    val = st.pop()
                idx = self._index(st, a[0])
                addr = self._element(heap, rs.pop(), idx, kind)
                if kind == "B":
                    ram[addr] = val & 0xFF
                elif kind == "I":
                    heap.put16(addr, val & 0xFFFF)
                    heap.put16(addr + 2, val >> 16)
                else:
                    heap.put16(addr, val)
            elif op is Op.ARRAYLENGTH:
                st.append(heap.u16(self._deref(rs.pop())))
            elif op in (Op.GETFIELD_S, Op.GETFIELD_I, Op.GETFIELD_A, Op.GETFIELD_A_FIXED):
                obj = self._deref(rs.pop())
                off = self._field_offset(heap, obj, op, a)
                if op is Op.GETFIELD_S:
                    st.append(heap.u16(obj + off))
                elif op is Op.GETFIELD_I:
                    st.append(heap.u16(obj + off + 2))
                    st.append(heap.u16(obj + off))
                else:
                    rs.append(heap.u16(obj + off))
            elif op in (Op.PUTFIELD_S, Op.PUTFIELD_I, Op.PUTFIELD_A, Op.PUTFIELD_A_FIXED):
                if op is Op.PUTFIELD_S:
                    vals = [st.pop()]
                elif op is Op.PUTFIELD_I:
                    lo = st.pop()
                    vals = [lo, st.pop()]
                else:
                    vals = [rs.pop()]
                obj = self._deref(rs.pop())
                off = self._field_offset(heap, obj, op, a)
                for k, val in enumerate(vals):
                    heap.put16(obj + off + 2 * k, val)
            elif op is Op.GETSTATIC_S:
                st.append(heap.u16(static_int_addr(a[0])))
            elif op is Op.GETSTATIC_I:
                st.append(heap.u16(static_int_addr(a[0] + 1)))
                st.append(heap.u16(static_int_addr(a[0])))
            elif op is Op.GETSTATIC_A:
                rs.append(heap.u16(static_ref_addr(inf.static_int_slots, a[0])))
            elif op is Op.PUTSTATIC_S:
                heap.put16(static_int_addr(a[0]), st.pop())
            elif op is Op.PUTSTATIC_I:
                heap.put16(static_int_addr(a[0]), st.pop())
                heap.put16(static_int_addr(a[0] + 1), st.pop())
            elif op is Op.PUTSTATIC_A:
                heap.put16(static_ref_addr(inf.static_int_slots, a[0]), rs.pop())
            elif op.info.branch:
                if op is Op.GOTO:
                    go = True
                elif name.startswith("IF_S"):
                    y = to_signed(st.pop(), 16)
                    x = to_signed(st.pop(), 16)
                    go = _COMPARE[op.info.cond](x, y)
                elif name.startswith("IF_I"):
                    y = _join(st.pop(), st.pop())
                    x = _join(st.pop(), st.pop())
                    go = _COMPARE[op.info.cond](x, y)
                else:
                    go = _COMPARE[op.info.cond](to_signed(st.pop(), 16), 0)
                if go:
                    frame.pc = frame.targets[a[0]]
            elif op in (Op.BRTARGET, Op.MARKLOOP, Op.LW_PARAMETER):
                pass
            elif op in (Op.INVOKESTATIC, Op.INVOKELIGHT):
                callee = self.methods[a[0]]
                nints = callee.param_slots
                nrefs = callee.param_refs
                if _stack_form(callee):
                    ints = st[len(st) - nints:] if nints else []
                else:
                    ints = self._stack_to_slots(callee.params, st[len(st) - nints:] if nints else [])
                del st[len(st) - nints:]
                refs = rs[len(rs) - nrefs:] if nrefs else []
                del rs[len(rs) - nrefs:]
                calls.append(frame)
                if len(calls) > 1000:
                    raise Trap("call depth exceeded")
                frame = self._frame(callee, ints, refs)
            elif op.info.terminator:
                if op is Op.SRETURN:
                    result = ("S", [st.pop()])
                elif op is Op.IRETURN:
                    lo = st.pop()
                    result = ("I", [st.pop(), lo])
                elif op is Op.ARETURN:
                    result = ("A", [rs.pop()])
                else:
                    result = ("V", [])
                if not calls:
                    kind, vals = result
                    if kind == "S":
                        return to_signed(vals[0], 16)
                    if kind == "I":
                        return _join(vals[1], vals[0])
                    if kind == "A":
                        return vals[0]
                    return None
                frame = calls.pop()
                kind, vals = result
                if kind == "A":
                    frame.rstack.append(vals[0])
                else:
                    frame.stack.extend(vals)
            elif op is Op.NEW:
                ci = self.class_index[a[0]]
                rs.append(heap.new_object(ci, inf.instance_int_slots(a[0]),
                                          inf.instance_ref_fields(a[0])))
            elif op is Op.NEWARRAY:
                count = to_signed(st.pop(), 16)
                rs.append(heap.new_array(a[0], count))
            else:
                raise InterpreterError(f"unhandled opcode {name}")
            self.steps = steps

    @staticmethod
    def _stack_to_slots(params: str, elems: list) -> list:
        """Stack elements (bottom to top) of the arguments to local slot order."""
        out = []
        i = 0
        for t in params:
            if t == "S":
                out.append(elems[i])
                i += 1
            elif t == "I":
                out += [elems[i + 1], elems[i]]
                i += 2
        return out

    @staticmethod
    def _index(st: list, width: int) -> int:
        if width == 16:
            return to_signed(st.pop(), 16)
        lo = st.pop()
        return to_signed(lo | st.pop() << 16, 32)

    @staticmethod
    def _deref(ref: int) -> int:
        if ref == 0:
            raise Trap("null reference")
        return ref

    def _element(self, heap: Heap, ref: int, idx: int, kind: str) -> int:
        arr = self._deref(ref)
        if not 0 <= idx < heap.u16(arr):
            raise Trap(f"array index {idx} out of bounds")
        return arr + 2 + idx * ELEMENT_SIZE[kind]

    def _field_offset(self, heap: Heap, obj: int, op: Op, a: tuple) -> int:
        cls, k = a
        if op.name.endswith(("_A", "_A_FIXED")):
            runtime_cls = self.inf.classes[heap.u16(obj)].name
            return 2 + 2 * self.inf.instance_int_slots(runtime_cls) + 2 * k
        return 2 + 2 * k


_SHORT_BIN = {
    "SADD": lambda x, y: x + y,
    "SSUB": lambda x, y: x - y,
    "SMUL": lambda x, y: x * y,
    "SDIV": lambda x, y: java_div(to_signed(x, 16), to_signed(y, 16), 16),
    "SREM": lambda x, y: java_rem(to_signed(x, 16), to_signed(y, 16), 16),
    "SAND": lambda x, y: x & y,
    "SOR": lambda x, y: x | y,
    "SXOR": lambda x, y: x ^ y,
}
_INT_BIN = {
    "IADD": lambda x, y: x + y,
    "ISUB": lambda x, y: x - y,
    "IMUL": lambda x, y: x * y,
    "IDIV": lambda x, y: java_div(x, y, 32),
    "IREM": lambda x, y: java_rem(x, y, 32),
    "IAND": lambda x, y: x & y,
    "IOR": lambda x, y: x | y,
    "IXOR": lambda x, y: x ^ y,
}
_COMPARE = {
    "EQ": lambda x, y: x == y,
    "NE": lambda x, y: x != y,
    "LT": lambda x, y: x < y,
    "GE": lambda x, y: x >= y,
    "GT": lambda x, y: x > y,
    "LE": lambda x, y: x <= y,
}


def interpret(inf: Infusion, inp: ProgramInput = ProgramInput()) -> RunOutcome:
    return Interpreter(inf).run(inp)
