"""Per-method translation from stack bytecode to native code.

The translator consumes the method body as a one-pass stream: every
bytecode instruction is read exactly once and translated immediately,
with no look-ahead and no second pass over the bytecode.  State carried
between instructions is limited to the stack manager, a few counters and
a table of stack depths indexed by branch-target id.

Register conventions:

* r0:r1   scratch and MUL result
* r18:r19 return address of a leaf lightweight method
* r22:r25 results (short in r24, int lo in r22 and hi in r24)
* X       reference stack (grows up), Y frame base, Z scratch pointer
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Optional

from ..bytecode.model import Infusion, Instr, MethodDef, instr_tags
from ..bytecode.opcodes import ARRAY_LOADS, ARRAY_STORES, ELEMENT_SIZE, KIND_CODE, Op
from ..isa import BranchCondition
from ..runtime.helpers import Helper
from ..runtime.layout import (CACHE_PAIRS, LW_RETURN, RET_INT_LO, RET_SHORT, SCRATCH, X_REG,
                              Z_REG, FrameLayout, frame_layout, static_int_addr,
                              static_ref_addr)
from ..stackcache import BaselineStack, CacheError, CacheManager, StackManager, add_immediate, parallel_move
from .branches import resolve_branches
from .emit import N, Emitter
from .peephole import peephole_basic, peephole_improved, registers

C = BranchCondition
ALL_CACHE_REGS = frozenset(r for p in CACHE_PAIRS for r in (p, p + 1))
MAX_DISP = 63


class OptLevel(enum.IntEnum):
    BASELINE = 0
    IMPROVED_PEEPHOLE = 1
    SIMPLE_CACHE = 2
    POPPED_VALUE = 3
    MARK_LOOPS = 4

    @property
    def short(self) -> str:
        return _SHORT_NAMES[self]

    @classmethod
    def parse(cls, text: str) -> "OptLevel":
        t = text.strip().lower()
        for level, name in _SHORT_NAMES.items():
            if t in (name, level.name.lower()):
                return level
        raise ValueError(f"unknown optimisation level {text!r}")


_SHORT_NAMES = {
    OptLevel.BASELINE: "baseline",
    OptLevel.IMPROVED_PEEPHOLE: "peephole",
    OptLevel.SIMPLE_CACHE: "cache",
    OptLevel.POPPED_VALUE: "popped",
    OptLevel.MARK_LOOPS: "markloop",
}
LEVELS = tuple(OptLevel)


class CompileError(ValueError):
    def __init__(self, message: str, method: str = "", index: int = -1):
        where = f"{method}[{index}]: " if method else ""
        super().__init__(where + message)


@dataclass
class CalleeInfo:
    """What a caller needs to know about an already compiled method."""

    name: str
    index: int
    address: int
    lightweight: bool
    params: str
    returns: str
    clobbers: frozenset


@dataclass
class CompiledMethod:
    name: str
    address: int
    code: list                  # NativeInstruction
    bc_of: list                 # bytecode index per native instruction (-1: prologue)
    labels: dict                # branch-target id -> absolute word address
    clobbers: frozenset
    layout: FrameLayout
    bytecode_consumed: int = 0
    states: list = field(default_factory=list)   # (bc, text, cache dump) when recorded

    @property
    def size(self) -> int:
        from ..isa import word_size
        return sum(word_size(i) for i in self.code)


_BRANCH_CONDS = {"EQ": C.EQ, "NE": C.NE, "LT": C.LT_S, "GE": C.GE_S}


def make_manager(level: OptLevel, em: Emitter, layout: FrameLayout, pin_cap: int) -> StackManager:
    if level <= OptLevel.IMPROVED_PEEPHOLE:
        return BaselineStack(em, layout)
    return CacheManager(em, layout, tags=level >= OptLevel.POPPED_VALUE,
                        pinning=level >= OptLevel.MARK_LOOPS, pin_cap=pin_cap)


class _Translator:
    def __init__(self, method: MethodDef, inf: Infusion, level: OptLevel, pin_cap: int,
                 callees: dict, record: bool):
        self.m = method
        self.inf = inf
        self.level = level
        self.callees = callees
        self.record = record
        self.layout = frame_layout(method)
        self.em = Emitter()
        self.sm = make_manager(level, self.em, self.layout, pin_cap)
        self.ref_depth = 0
        self.dead = False
        self.target_depth: dict = {}       # brtarget id -> (int depth, ref depth)
        self.extra_clobbers: set = set()
        self.callee_clobbers: set = set()
        self.states: list = []
        self.consumed = 0
        self.leaf = not method.nested

    # small emission helpers ---------------------------------------------------
    def _reach(self, ptr: str, off: int, width: int) -> tuple:
        """Pointer and displacement able to address ``width`` bytes at ptr+off."""
        if off + width - 1 <= MAX_DISP:
            return ptr, off
        if ptr != "Z":
            self.em.movw(Z_REG, {"Y": 28, "X": 26}[ptr])
        while off + width - 1 > MAX_DISP:
            step = min(MAX_DISP, off)
            self.em.op(N.ADIW, rd=Z_REG, imm=step)
            off -= step
        return "Z", off

    def ldd16(self, pair: int, ptr: str, off: int) -> None:
        ptr, off = self._reach(ptr, off, 2)
        self.em.ldd16(pair, ptr, off)

    def std16(self, ptr: str, off: int, pair: int) -> None:
        ptr, off = self._reach(ptr, off, 2)
        self.em.std16(ptr, off, pair)

    def ref_push(self, pair: int) -> None:
        self.em.op(N.ST_INC, rs=pair, ptr="X")
        self.em.op(N.ST_INC, rs=pair + 1, ptr="X")

    def ref_pop(self, pair: int) -> None:
        self.em.op(N.LD_DEC, rd=pair + 1, ptr="X")
        self.em.op(N.LD_DEC, rd=pair, ptr="X")

    def pop_int(self) -> tuple:
        lo = self.sm.pop(0)
        hi = self.sm.pop(1)
        return lo, hi

    def push_int(self, lo: int, hi: int, tags=(None, None)) -> None:
        self.sm.push(hi, tags[1])
        self.sm.push(lo, tags[0])

    def dest(self, *groups) -> tuple:
        """Claim the first operand group that may be overwritten in place.

        Returns ``(pairs, index of the group used)``; when no group is free
        the first one is copied.
        """
        for i, g in enumerate(groups):
            if all(self.sm.writable(p) for p in g):
                return tuple(self.sm.claim(p) for p in g), i
        return tuple(self.sm.claim(p) for p in groups[0]), 0

    # driver -----------------------------------------------------------------
    def prologue(self) -> None:
        if not self.m.lightweight:
            return
        if self.m.params and not self.m.handwritten_lightweight:
            raise CompileError("lightweight method in source form (run the infuser first)",
                               self.m.name)
        self.em.r(N.POP, LW_RETURN)
        self.em.r(N.POP, LW_RETURN + 1)
        if not self.leaf:
            self.em.std16("Y", self.layout.ret_slot, LW_RETURN)

    def run(self, stream: Iterable[Instr]) -> None:
        self.prologue()
        for bc, instr in enumerate(stream):
            self.consumed += 1
            self.em.bc = bc
            self.sm.begin_instruction()
            if self.dead and instr.op is not Op.BRTARGET:
                continue
            try:
                self.translate(instr)
            except CompileError:
                raise
            except Exception as exc:
                raise CompileError(f"{instr}: {exc}", self.m.name, bc) from exc
            if self.record:
                self.states.append((bc, str(instr), self.sm.dump()))

    def translate(self, instr: Instr) -> None:
        op = instr.op
        if op.info.tag_use is not None and self.sm.can_skip(instr):
            return
        handler = getattr(self, "op_" + op.name, None)
        if handler is None:
            name = op.name
            if name in ARRAY_LOADS:
                return self.array_load(ARRAY_LOADS[name], instr.args[0])
            if name in ARRAY_STORES:
                return self.array_store(ARRAY_STORES[name], instr.args[0])
            if name.startswith("IF_S"):
                return self._if_cmp(instr, 1)
            if name.startswith("IF_I"):
                return self._if_cmp(instr, 2)
            if name.startswith("IF"):
                return self._if_zero(instr)
            raise CompileError(f"no translation for {name}", self.m.name)
        handler(instr)
        if op.info.terminator:
            self.dead = True

    # loads and stores -------------------------------------------------------
    def load_halves(self, tags: tuple, loader) -> None:
        """Push 16-bit halves (high first) unless a register already holds them."""
        for k in reversed(range(len(tags))):
            if self.sm.reuse(tags[k]):
                continue
            d = self.sm.getfree(0)
            loader(d, k)
            self.sm.push(d, tags[k])

    def op_SLOAD(self, instr):
        off = self.layout.int_slot(instr.args[0])
        self.load_halves(instr_tags(instr), lambda d, k: self.ldd16(d, "Y", off))

    def op_ILOAD(self, instr):
        n = instr.args[0]
        self.load_halves(instr_tags(instr),
                         lambda d, k: self.ldd16(d, "Y", self.layout.int_slot(n + k)))

    def _const(self, instr, value: int, halves: int) -> None:
        tags = instr_tags(instr)
        self.load_halves(tags, lambda d, k: self.em.ldi16(d, value >> (16 * k)))

    def op_SCONST(self, instr):
        self._const(instr, instr.args[0], 1)

    op_BIPUSH = op_SIPUSH = op_SCONST

    def op_ICONST(self, instr):
        self._const(instr, instr.args[0], 2)

    def op_GETSTATIC_S(self, instr):
        addr = static_int_addr(instr.args[0])
        self.load_halves(instr_tags(instr), lambda d, k: self._static_load(d, addr))

    def op_GETSTATIC_I(self, instr):
        n = instr.args[0]
        self.load_halves(instr_tags(instr),
                         lambda d, k: self._static_load(d, static_int_addr(n + k)))

    def _static_load(self, d: int, addr: int) -> None:
        self.em.ldi16(Z_REG, addr)
        self.em.ldd16(d, "Z", 0)

    def _static_store(self, addr: int, v: int) -> None:
        self.em.ldi16(Z_REG, addr)
        self.em.std16("Z", 0, v)

    def op_SSTORE(self, instr):
        (tag,) = instr_tags(instr)
        v = self.sm.pop_tostore(tag, 0)
        self.std16("Y", self.layout.int_slot(instr.args[0]), v)

    def op_ISTORE(self, instr):
        n = instr.args[0]
        for k, tag in enumerate(instr_tags(instr)):
            v = self.sm.pop_tostore(tag, k)
            self.std16("Y", self.layout.int_slot(n + k), v)

    def op_PUTSTATIC_S(self, instr):
        (tag,) = instr_tags(instr)
        v = self.sm.pop_tostore(tag, 0)
        self._static_store(static_int_addr(instr.args[0]), v)

    def op_PUTSTATIC_I(self, instr):
        n = instr.args[0]
        for k, tag in enumerate(instr_tags(instr)):
            v = self.sm.pop_tostore(tag, k)
            self._static_store(static_int_addr(n + k), v)

    # references -------------------------------------------------------------
    def op_ALOAD(self, instr):
        self.ldd16(SCRATCH, "Y", self.layout.ref_slot(instr.args[0]))
        self.ref_push(SCRATCH)
        self.ref_depth += 1

    def op_ASTORE(self, instr):
        self.ref_pop(SCRATCH)
        self.std16("Y", self.layout.ref_slot(instr.args[0]), SCRATCH)
        self.ref_depth -= 1

    def op_ACONST_NULL(self, instr):
        self.em.rr(N.EOR, SCRATCH, SCRATCH)
        self.em.op(N.ST_INC, rs=SCRATCH, ptr="X")
        self.em.op(N.ST_INC, rs=SCRATCH, ptr="X")
        self.ref_depth += 1

    def op_GETSTATIC_A(self, instr):
        self.em.ldi16(Z_REG, static_ref_addr(self.inf.static_int_slots, instr.args[0]))
        self.em.ldd16(SCRATCH, "Z", 0)
        self.ref_push(SCRATCH)
        self.ref_depth += 1

    def op_PUTSTATIC_A(self, instr):
        self.ref_pop(SCRATCH)
        self.em.ldi16(Z_REG, static_ref_addr(self.inf.static_int_slots, instr.args[0]))
        self.em.std16("Z", 0, SCRATCH)
        self.ref_depth -= 1

    # arithmetic -------------------------------------------------------------
    def _binop(self, ops: tuple, commutative: bool, width: int = 1) -> None:
        if width == 1:
            b = (self.sm.pop(1),)
            a = (self.sm.pop(0),)
        else:
            b = self.pop_int()
            a = (self.sm.pop(2), self.sm.pop(3))
        if commutative and self.sm.prefers_top_dest:
            d, which = self.dest(b, a)
            s = a if which == 0 else b
        elif commutative:
            d, which = self.dest(a, b)
            s = b if which == 0 else a
        else:
            d, _ = self.dest(a)
            s = b
        regs_d = [r for p in d for r in (p, p + 1)]
        regs_s = [r for p in s for r in (p, p + 1)]
        for i, (rd, rs) in enumerate(zip(regs_d, regs_s)):
            self.em.rr(ops[0] if i == 0 else ops[1], rd, rs)
        if width == 1:
            self.sm.push(d[0])
        else:
            self.push_int(d[0], d[1])

    def op_SADD(self, instr): self._binop((N.ADD, N.ADC), True)
    def op_SSUB(self, instr): self._binop((N.SUB, N.SBC), False)
    def op_SAND(self, instr): self._binop((N.AND, N.AND), True)
    def op_SOR(self, instr): self._binop((N.OR, N.OR), True)
    def op_SXOR(self, instr): self._binop((N.EOR, N.EOR), True)
    def op_IADD(self, instr): self._binop((N.ADD, N.ADC), True, 2)
    def op_ISUB(self, instr): self._binop((N.SUB, N.SBC), False, 2)
    def op_IAND(self, instr): self._binop((N.AND, N.AND), True, 2)
    def op_IOR(self, instr): self._binop((N.OR, N.OR), True, 2)
    def op_IXOR(self, instr): self._binop((N.EOR, N.EOR), True, 2)

    def op_SMUL(self, instr):
        b = self.sm.pop(1)
        a = self.sm.pop(0)
        em = self.em
        em.rr(N.MUL, a, b)
        em.movw(Z_REG, SCRATCH)
        em.rr(N.MUL, a, b + 1)
        em.rr(N.ADD, Z_REG + 1, SCRATCH)
        em.rr(N.MUL, a + 1, b)
        em.rr(N.ADD, Z_REG + 1, SCRATCH)
        (d,), _ = self.dest((a,), (b,))
        em.movw(d, Z_REG)
        self.sm.push(d)

    def op_IMUL(self, instr):
        b_lo, b_hi = self.pop_int()
        a_lo, a_hi = self.sm.pop(2), self.sm.pop(3)
        operands = (a_lo, a_hi, b_lo, b_hi)
        (c_lo, c_hi), borrowed = self._product_pairs(operands)
        a = (a_lo, a_lo + 1, a_hi, a_hi + 1)
        b = (b_lo, b_lo + 1, b_hi, b_hi + 1)
        c = (c_lo, c_lo + 1, c_hi, c_hi + 1)
        em = self.em
        zero = Z_REG
        em.rr(N.EOR, zero, zero)
        em.rr(N.MUL, a[0], b[0])
        em.movw(c_lo, SCRATCH)
        em.rr(N.MUL, a[0], b[2])
        em.movw(c_hi, SCRATCH)
        for i, j in ((1, 1), (2, 0)):
            em.rr(N.MUL, a[i], b[j])
            em.rr(N.ADD, c[2], 0)
            em.rr(N.ADC, c[3], 1)
        for i, j in ((0, 1), (1, 0)):
            em.rr(N.MUL, a[i], b[j])
            em.rr(N.ADD, c[1], 0)
            em.rr(N.ADC, c[2], 1)
            em.rr(N.ADC, c[3], zero)
        for i, j in ((0, 3), (1, 2), (2, 1), (3, 0)):
            em.rr(N.MUL, a[i], b[j])
            em.rr(N.ADD, c[3], 0)
        if borrowed:
            c_lo, c_hi = self._return_borrowed(c_lo, c_hi, borrowed, operands)
        self.push_int(c_lo, c_hi)

    def _product_pairs(self, operands: tuple) -> tuple:
        """Two result pairs for IMUL.

        When pins leave too few pairs, a pinned pair outside the operands is
        borrowed and saved on the hardware stack until the product is moved out.
        """
        out, borrowed = [], []
        for _ in range(2):
            try:
                out.append(self.sm.getfree())
                continue
            except CacheError:
                pass
            pair = next((p for p in reversed(CACHE_PAIRS) if self.sm.is_pinned(p)
                         and p not in operands and p not in out), None)
            if pair is None:
                raise CompileError("IMUL: no register pair to borrow", self.m.name)
            self.em.pushw(pair)
            borrowed.append(pair)
            out.append(pair)
        return tuple(out), borrowed

    def _return_borrowed(self, c_lo: int, c_hi: int, borrowed: list, operands: tuple) -> tuple:
        # dead operand pairs take over the borrowed halves of the product
        spare = [p for p in operands if self.sm.writable(p) and p not in (c_lo, c_hi)]
        spare = list(dict.fromkeys(spare))
        if len(spare) < len(borrowed):
            raise CompileError("IMUL: no pair to receive the product", self.m.name)
        moved = {}
        for pair, target in zip(borrowed, spare):
            self.sm.claim(target)
            self.sm.locked.add(target)
            self.em.movw(target, pair)
            moved[pair] = target
        for pair in reversed(borrowed):
            self.em.popw(pair)
        return moved.get(c_lo, c_lo), moved.get(c_hi, c_hi)

    def _short_helper(self, helper: Helper) -> None:
        b = self.sm.pop(1)
        a = self.sm.pop(0)
        self.em.movw(SCRATCH, a)
        self.em.movw(Z_REG, b)
        self.em.call(helper.address)
        (d,), _ = self.dest((a,), (b,))
        self.em.movw(d, SCRATCH)
        self.sm.push(d)

    def op_SDIV(self, instr): self._short_helper(Helper.SDIV)
    def op_SREM(self, instr): self._short_helper(Helper.SREM)

    def op_SIMUL(self, instr):
        b = self.sm.pop(1)
        a = self.sm.pop(0)
        self.em.movw(SCRATCH, a)
        self.em.movw(Z_REG, b)
        self.em.call(Helper.SIMUL.address)
        hi = self.sm.getfree()
        self.em.movw(hi, Z_REG)
        (lo,), _ = self.dest((a,), (b,))
        self.em.movw(lo, SCRATCH)
        self.push_int(lo, hi)

    def _int_helper(self, helper: Helper) -> None:
        b_lo, b_hi = self.pop_int()
        a = (self.sm.pop(2), self.sm.pop(3))
        (d_lo, d_hi), _ = self.dest(a)
        self.em.ldi(Z_REG, d_lo)
        self.em.ldi(Z_REG + 1, d_hi)
        self.em.ldi(0, b_lo)
        self.em.ldi(1, b_hi)
        self.em.call(helper.address)
        self.extra_clobbers |= {d_lo, d_lo + 1, d_hi, d_hi + 1}
        self.push_int(d_lo, d_hi)

    def op_IDIV(self, instr): self._int_helper(Helper.IDIV)
    def op_IREM(self, instr): self._int_helper(Helper.IREM)

    def op_SNEG(self, instr):
        v = self.sm.pop_destructive(0)
        em = self.em
        em.rr(N.EOR, Z_REG, Z_REG)
        em.rr(N.EOR, Z_REG + 1, Z_REG + 1)
        em.rr(N.SUB, Z_REG, v)
        em.rr(N.SBC, Z_REG + 1, v + 1)
        em.movw(v, Z_REG)
        self.sm.push(v)

    def op_INEG(self, instr):
        (lo, hi), _ = self.dest(self.pop_int())
        em = self.em
        for r in (0, 1, Z_REG, Z_REG + 1):
            em.rr(N.EOR, r, r)
        em.rr(N.SUB, 0, lo)
        em.rr(N.SBC, 1, lo + 1)
        em.rr(N.SBC, Z_REG, hi)
        em.rr(N.SBC, Z_REG + 1, hi + 1)
        em.movw(lo, SCRATCH)
        em.movw(hi, Z_REG)
        self.push_int(lo, hi)

    def _inc(self, instr, width: int) -> None:
        n, delta = instr.args
        tags = instr_tags(instr)
        offs = [self.layout.int_slot(n + k) for k in range(width)]
        pairs = []
        for k in range(width):
            t = tags[k]
            held = self.sm._holder(t) if self.sm.tags_enabled else None
            if held is not None and self.sm.writable(held) and held not in getattr(self.sm, "locked", ()):
                self.sm.locked.add(held)
                pairs.append(held)
            elif self.sm.tags_enabled or width == 2:
                p = self.sm.getfree()
                self.ldd16(p, "Y", offs[k])
                pairs.append(p)
            else:
                self.ldd16(SCRATCH, "Y", offs[k])
                pairs.append(SCRATCH)
        add_immediate(self.em, pairs, delta)
        for k, p in enumerate(pairs):
            self.std16("Y", offs[k], p)
            if p != SCRATCH:
                self.sm.claim(p)
                self.sm.retag(p, tags[k])
            else:
                self.sm.invalidate(tags[k])

    def op_SINC(self, instr): self._inc(instr, 1)
    def op_IINC(self, instr): self._inc(instr, 2)

    # shifts -----------------------------------------------------------------
    def _shift_ops(self, name: str, regs: list) -> list:
        """One single-bit shift of the little-endian register list."""
        if name.endswith("SHL"):
            return [(N.LSL, regs[0])] + [(N.ROL, r) for r in regs[1:]]
        first = N.ASR if name.endswith("SHR") and not name.endswith("USHR") else N.LSR
        rev = regs[::-1]
        return [(first, rev[0])] + [(N.ROR, r) for r in rev[1:]]

    def _var_shift(self, name: str, width: int) -> None:
        if width == 1:
            cnt = self.sm.pop(1)
            v = [self.sm.pop(0)]
        else:
            cnt, _cnt_hi = self.pop_int()
            v = [self.sm.pop(2), self.sm.pop(3)]
        (cnt,), _ = self.dest((cnt,))
        v = list(self.dest(tuple(v))[0])
        regs = [r for p in v for r in (p, p + 1)]
        body = self._shift_ops(name, regs)
        em = self.em
        em.op(N.RJMP, imm=len(body))
        for opc, r in body:
            em.r(opc, r)
        em.r(N.DEC, cnt)
        em.op(N.BR_COND, cond=C.PL, imm=-(len(body) + 2))
        if width == 1:
            self.sm.push(v[0])
        else:
            self.push_int(v[0], v[1])

    def op_SSHL(self, instr): self._var_shift("SSHL", 1)
    def op_SSHR(self, instr): self._var_shift("SSHR", 1)
    def op_SUSHR(self, instr): self._var_shift("SUSHR", 1)
    def op_ISHL(self, instr): self._var_shift("ISHL", 2)
    def op_ISHR(self, instr): self._var_shift("ISHR", 2)
    def op_IUSHR(self, instr): self._var_shift("IUSHR", 2)

    def _const_shift(self, name: str, width: int, k: int) -> None:
        if width == 1:
            v = [self.sm.pop_destructive(0)]
        else:
            v = list(self.dest(self.pop_int())[0])
        regs = [r for p in v for r in (p, p + 1)]
        n = len(regs)
        em = self.em
        m, k = divmod(k, 8)
        m = min(m, n)
        if m:
            if name.endswith("SHL"):
                if m == 2 and n == 4:
                    em.movw(regs[2], regs[0])
                else:
                    for i in range(n - 1, m - 1, -1):
                        em.rr(N.MOV, regs[i], regs[i - m])
                for i in range(m):
                    em.rr(N.EOR, regs[i], regs[i])
            else:
                arith = not name.endswith("USHR")
                if m == 2 and n == 4:
                    em.movw(regs[0], regs[2])
                else:
                    for i in range(n - m):
                        em.rr(N.MOV, regs[i], regs[i + m])
                fill = regs[n - m:]
                if arith:
                    sign = regs[n - m - 1] if n - m - 1 >= 0 else fill[0]
                    em.rr(N.MOV, fill[0], sign)
                    em.r(N.LSL, fill[0])
                    em.rr(N.SBC, fill[0], fill[0])
                    for r in fill[1:]:
                        em.rr(N.MOV, r, fill[0])
                else:
                    for r in fill:
                        em.rr(N.EOR, r, r)
        for _ in range(k):
            for opc, r in self._shift_ops(name, regs):
                em.r(opc, r)
        if width == 1:
            self.sm.push(v[0])
        else:
            self.push_int(v[0], v[1])

    def op_SSHL_CONST(self, instr): self._const_shift("SSHL", 1, instr.args[0])
    def op_SSHR_CONST(self, instr): self._const_shift("SSHR", 1, instr.args[0])
    def op_SUSHR_CONST(self, instr): self._const_shift("SUSHR", 1, instr.args[0])
    def op_ISHL_CONST(self, instr): self._const_shift("ISHL", 2, instr.args[0])
    def op_ISHR_CONST(self, instr): self._const_shift("ISHR", 2, instr.args[0])
    def op_IUSHR_CONST(self, instr): self._const_shift("IUSHR", 2, instr.args[0])

    # conversions and shuffles -----------------------------------------------
    def op_S2I(self, instr):
        v = self.sm.pop(0)
        h = self.sm.getfree(1)
        em = self.em
        em.rr(N.MOV, h, v + 1)
        em.r(N.LSL, h)
        em.rr(N.SBC, h, h)
        em.rr(N.MOV, h + 1, h)
        self.sm.push(h)
        self.sm.push(v)

    def op_I2S(self, instr):
        lo = self.sm.pop(0)
        self.sm.drop()
        self.sm.push(lo)

    def op_SDUP(self, instr):
        v = self.sm.pop(0)
        self.sm.push(v)
        if self.sm.is_pinned(v):
            self.sm.push(v)
            return
        c = self.sm.getfree(0)
        self.em.movw(c, v)
        self.sm.push(c)

    def op_SPOP(self, instr):
        self.sm.drop()

    def op_IPOP(self, instr):
        self.sm.drop()
        self.sm.drop()

    # arrays and objects -----------------------------------------------------
    def _index(self, width: int) -> int:
        idx = self.sm.pop(1)
        if width == 32:
            self.sm.drop()
        return idx

    def _element_address(self, idx: int, kind: str) -> None:
        """Z <- arrayref (popped from X) + scaled index; element at Z+2."""
        em = self.em
        self.ref_pop(Z_REG)
        self.ref_depth -= 1
        size = ELEMENT_SIZE[kind]
        if size == 1:
            em.rr(N.ADD, Z_REG, idx)
            em.rr(N.ADC, Z_REG + 1, idx + 1)
            return
        em.movw(SCRATCH, idx)
        for _ in range(size.bit_length() - 1):
            em.rr(N.ADD, 0, 0)
            em.rr(N.ADC, 1, 1)
        em.rr(N.ADD, Z_REG, 0)
        em.rr(N.ADC, Z_REG + 1, 1)

    def array_load(self, kind: str, width: int) -> None:
        idx = self._index(width)
        self._element_address(idx, kind)
        em = self.em
        if kind == "A":
            em.ldd16(SCRATCH, "Z", 2)
            self.ref_push(SCRATCH)
            self.ref_depth += 1
        elif kind == "I":
            lo = self.sm.getfree(0)
            hi = self.sm.getfree(2)
            em.ldd16(lo, "Z", 2)
            em.ldd16(hi, "Z", 4)
            self.push_int(lo, hi)
        elif kind == "S":
            d = self.sm.getfree(0)
            em.ldd16(d, "Z", 2)
            self.sm.push(d)
        else:
            d = self.sm.getfree(0)
            em.ldd(d, "Z", 2)
            em.rr(N.MOV, d + 1, d)
            em.r(N.LSL, d + 1)
            em.rr(N.SBC, d + 1, d + 1)
            self.sm.push(d)

    def array_store(self, kind: str, width: int) -> None:
        em = self.em
        if kind == "A":
            v = (self.sm.getfree(),)
            self.ref_pop(v[0])
            self.ref_depth -= 1
        elif kind == "I":
            v = self.pop_int()
        else:
            v = (self.sm.pop(0),)
        idx = self._index(width)
        self._element_address(idx, kind)
        if kind == "B":
            em.std("Z", 2, v[0])
        else:
            for k, p in enumerate(v):
                em.std16("Z", 2 + 2 * k, p)

    def op_ARRAYLENGTH(self, instr):
        self.ref_pop(Z_REG)
        self.ref_depth -= 1
        d = self.sm.getfree(0)
        self.em.ldd16(d, "Z", 0)
        self.sm.push(d)

    def op_GETFIELD_S(self, instr):
        cls, k = instr.args
        self.ref_pop(Z_REG)
        self.ref_depth -= 1
        d = self.sm.getfree(0)
        self.ldd16(d, "Z", 2 + 2 * k)
        self.sm.push(d)

    def op_GETFIELD_I(self, instr):
        cls, k = instr.args
        self.ref_pop(Z_REG)
        self.ref_depth -= 1
        lo = self.sm.getfree(0)
        hi = self.sm.getfree(2)
        ptr, off = self._reach("Z", 2 + 2 * k, 4)
        self.em.ldd16(lo, ptr, off)
        self.em.ldd16(hi, ptr, off + 2)
        self.push_int(lo, hi)

    def op_PUTFIELD_S(self, instr):
        cls, k = instr.args
        v = self.sm.pop(0)
        self.ref_pop(Z_REG)
        self.ref_depth -= 1
        self.std16("Z", 2 + 2 * k, v)

    def op_PUTFIELD_I(self, instr):
        cls, k = instr.args
        lo, hi = self.pop_int()
        self.ref_pop(Z_REG)
        self.ref_depth -= 1
        ptr, off = self._reach("Z", 2 + 2 * k, 4)
        self.em.std16(ptr, off, lo)
        self.em.std16(ptr, off + 2, hi)

    def _ref_field_fixed(self, cls: str, k: int) -> int:
        return 2 + 2 * self.inf.instance_int_slots(cls) + 2 * k

    def op_GETFIELD_A_FIXED(self, instr):
        cls, k = instr.args
        self.ref_pop(Z_REG)
        self.ldd16(SCRATCH, "Z", self._ref_field_fixed(cls, k))
        self.ref_push(SCRATCH)

    def op_PUTFIELD_A_FIXED(self, instr):
        cls, k = instr.args
        self.ref_pop(SCRATCH)
        self.ref_pop(Z_REG)
        self.std16("Z", self._ref_field_fixed(cls, k), SCRATCH)
        self.ref_depth -= 2

    def op_GETFIELD_A(self, instr):
        cls, k = instr.args
        self.em.ldi(0, k)
        self.em.call(Helper.GETFIELD_A.address)

    def op_PUTFIELD_A(self, instr):
        cls, k = instr.args
        self.em.ldi(0, k)
        self.em.call(Helper.PUTFIELD_A.address)
        self.ref_depth -= 2

    def op_NEW(self, instr):
        self.em.ldi16(Z_REG, self.inf.class_index(instr.args[0]))
        self.em.call(Helper.NEW.address)
        self.ref_depth += 1

    def op_NEWARRAY(self, instr):
        n = self.sm.pop(0)
        self.em.movw(Z_REG, n)
        self.em.ldi(0, KIND_CODE[instr.args[0]])
        self.em.call(Helper.NEWARRAY.address)
        self.ref_depth += 1

    # control flow -----------------------------------------------------------
    def _record_target(self, label: int) -> None:
        self.target_depth.setdefault(label, (self.sm.depth, self.ref_depth))

    def _cmp_branch(self, label: int, cond: str, a: list, b: list) -> None:
        """Compare register lists ``a`` (deeper operand) and ``b`` and branch."""
        if cond in ("GT", "LE"):
            a, b = b, a
            hw = C.LT_S if cond == "GT" else C.GE_S
        else:
            hw = _BRANCH_CONDS[cond]
        for i, (x, y) in enumerate(zip(a, b)):
            self.em.rr(N.CP if i == 0 else N.CPC, x, y)
        self.em.branch(label, hw)

    def _if_cmp(self, instr, width: int) -> None:
        if width == 1:
            b = [self.sm.pop(0)]
            a = [self.sm.pop(1)]
        else:
            b = list(self.pop_int())
            a = [self.sm.pop(2), self.sm.pop(3)]
        self.sm.flush()
        label = instr.args[0]
        self._record_target(label)
        ra = [r for p in a for r in (p, p + 1)]
        rb = [r for p in b for r in (p, p + 1)]
        self._cmp_branch(label, instr.op.info.cond, ra, rb)

    def _if_zero(self, instr) -> None:
        v = self.sm.pop(0)
        self.sm.flush()
        label = instr.args[0]
        self._record_target(label)
        self.em.ldi(Z_REG, 0)
        self._cmp_branch(label, instr.op.info.cond, [v, v + 1], [Z_REG, Z_REG])

    def op_GOTO(self, instr):
        self.sm.flush()
        self._record_target(instr.args[0])
        self.em.branch(instr.args[0], None)

    def op_BRTARGET(self, instr):
        label = instr.args[0]
        if self.dead:
            depth, refs = self.target_depth.get(label, (0, 0))
            self.sm.flush()
            self.sm.clear_tags()
            self.sm.set_depth(depth)
            self.ref_depth = refs
            self.dead = False
        else:
            self.sm.flush()
            self.sm.clear_tags()
        self.em.label(label)

    def op_MARKLOOP(self, instr):
        if not self.sm.pinning_enabled:
            return
        mark = instr.args[0]
        if mark.begin:
            self.sm.pin(mark)
        else:
            self.sm.unpin(mark)

    def op_LW_PARAMETER(self, instr):
        t = instr.args[0]
        if t == "A":
            self.ref_depth += 1
        else:
            self.sm.set_depth(self.sm.depth + (2 if t == "I" else 1))

    # calls ------------------------------------------------------------------
    def _push_result(self, returns: str) -> None:
        if returns == "S":
            self.sm.push(RET_SHORT)
        elif returns == "I":
            self.push_int(RET_INT_LO, RET_SHORT)
        elif returns == "A":
            self.ref_push(RET_SHORT)
            self.ref_depth += 1

    def _callee(self, name: str) -> CalleeInfo:
        try:
            return self.callees[name]
        except KeyError:
            raise CompileError(f"callee {name!r} not compiled yet", self.m.name) from None

    def op_INVOKESTATIC(self, instr):
        callee = self.inf.method(instr.args[0])
        if callee.lightweight:
            return self.op_INVOKELIGHT(instr)
        idx = self.inf.method_index(callee.name)
        self.sm.flush()
        self.sm.clear_tags()
        pinned = self.sm.pinned_pairs()
        for p, (off, _var) in pinned.items():
            self.em.std16("Y", off, p)
        em = self.em
        layout = frame_layout(callee)
        em.call(Helper.PREINVOKE.address)
        em.ldi16(RET_SHORT, idx)
        em.ldi16(RET_INT_LO, 2 * callee.param_slots)
        em.ldi16(20, 2 * callee.param_refs)
        em.ldi16(Z_REG, layout.size)
        em.call(Helper.CALL_METHOD.address)
        em.call(Helper.POSTINVOKE.address)
        for p, (off, _var) in pinned.items():
            self.em.ldd16(p, "Y", off)
        self.sm.set_depth(self.sm.depth - callee.param_slots)
        self.ref_depth -= callee.param_refs
        self.callee_clobbers |= ALL_CACHE_REGS
        self._push_result(callee.returns)

    def op_INVOKELIGHT(self, instr):
        info = self._callee(instr.args[0])
        self.sm.flush()
        self.sm.clear_tags()
        saved = {p: v for p, v in self.sm.pinned_pairs().items()
                 if {p, p + 1} & info.clobbers}
        for p, (off, _var) in saved.items():
            self.em.std16("Y", off, p)
        self.em.call(info.address)
        for p, (off, _var) in saved.items():
            self.em.ldd16(p, "Y", off)
        slots = sum(2 if t == "I" else 1 for t in info.params if t != "A")
        self.sm.set_depth(self.sm.depth - slots)
        self.ref_depth -= info.params.count("A")
        self.callee_clobbers |= info.clobbers
        self._push_result(info.returns)

    def _return(self, moves: list, refs_kept: int = 0) -> None:
        """Common return path once the result is in its registers."""
        em = self.em
        if not self.m.lightweight:
            em.op(N.RET)
            return
        # a lightweight method must leave both stacks as its caller expects
        for _ in range(self.sm.spilled):
            em.r(N.POP, SCRATCH)
            em.r(N.POP, SCRATCH)
        leftover = self.ref_depth - refs_kept
        while leftover > 0:
            step = min(leftover, 31)
            em.op(N.SBIW, rd=X_REG, imm=2 * step)
            leftover -= step
        if not self.leaf:
            em.ldd16(LW_RETURN, "Y", self.layout.ret_slot)
        em.r(N.PUSH, LW_RETURN + 1)
        em.r(N.PUSH, LW_RETURN)
        em.op(N.RET)

    def op_SRETURN(self, instr):
        v = self.sm.pop(0)
        self.em.movw(RET_SHORT, v)
        self._drop_cached()
        self._return([])

    def op_IRETURN(self, instr):
        lo, hi = self.pop_int()
        parallel_move(self.em, [(RET_INT_LO, lo), (RET_SHORT, hi)])
        self._drop_cached()
        self._return([])

    def op_ARETURN(self, instr):
        self.ref_pop(RET_SHORT)
        self.ref_depth -= 1
        self._drop_cached()
        self._return([])

    def op_RETURN(self, instr):
        self._drop_cached()
        self._return([])

    def _drop_cached(self) -> None:
        stack = getattr(self.sm, "stack", None)
        if stack:
            stack.clear()


def compile_method(method: MethodDef, inf: Infusion, level: OptLevel = OptLevel.MARK_LOOPS,
                   pin_cap: int = 7, base_address: int = 0, callees: Optional[dict] = None,
                   stream: Optional[Iterable[Instr]] = None, record: bool = False
                   ) -> CompiledMethod:
    """Translate one method; ``stream`` defaults to ``iter(method.body)``."""
    level = OptLevel(level)
    tr = _Translator(method, inf, level, pin_cap, callees or {}, record)
    tr.run(iter(method.body) if stream is None else stream)
    items = tr.em.items
    if level >= OptLevel.IMPROVED_PEEPHOLE:
        items = peephole_improved(items)
    else:
        items = peephole_basic(items)
    resolved, labels = resolve_branches(items, base_address)
    code = [it.instr for it in resolved]
    written = set()
    for ins in code:
        written |= registers(ins)[1]
    clobbers = frozenset((written | tr.extra_clobbers | tr.callee_clobbers) & ALL_CACHE_REGS)
    return CompiledMethod(method.name, base_address, code, [it.bc for it in resolved], labels,
                          clobbers, tr.layout, tr.consumed, tr.states)


def callee_info(cm: CompiledMethod, method: MethodDef, index: int) -> CalleeInfo:
    return CalleeInfo(method.name, index, cm.address, method.lightweight, method.params,
                      method.returns, cm.clobbers)
