"""Cycle-counting simulator for compiled images.

The simulator executes one native instruction per step and keeps an
execution count (and, for branches, a taken count) per address.  Cycle
totals and per-category breakdowns are derived from those counts after
the run, which keeps the inner loop small.  An optional trace records one
row per executed instruction.

Runtime helpers (frame management, division, allocation, non-fixed ref
fields) are Python routines reached through ``CALL`` to their fixed
addresses; each charges its documented cost to the ``other`` category.
"""

from __future__ import annotations

import csv
import json
from collections import Counter
from dataclasses import dataclass
from typing import Optional

from ..bytecode.opcodes import ELEMENT_SIZE
from ..compiler.image import CodeImage
from ..isa import CATEGORIES, BranchCondition, NativeOpcode, category, cycle_cost, word_size
from .helpers import FIELD_CHAIN_STEP_COST, HELPER_COST, NEWARRAY_BYTE_COST, PARAM_WORD_COST, Helper
from .layout import BOOT_REF_BYTES, HELPER_BASE, RAM_SIZE, frame_top
from .memory import KIND_OF_CODE, Heap, ProgramInput, RunOutcome, Trap, materialise_args, to_signed

N = NativeOpcode
DEFAULT_MAX_STEPS = 20_000_000

# dense opcode numbers for the dispatch chain
(_LDD, _STD, _MOVW, _PUSH, _POP, _ADD, _ADC, _SUB, _SBC, _CP, _CPC, _BR, _RJMP, _LDI, _MOV,
 _AND, _OR, _EOR, _INC, _DEC, _LSR, _LSL, _ROL, _ROR, _ASR, _ADIW, _SBIW, _MUL, _MULS,
 _LD_INC, _LD_DEC, _ST_INC, _ST_DEC, _JMP, _CALL, _RET, _IJMP, _NOP, _BREAK) = range(39)
_CODE = {
    N.LDD: _LDD, N.STD: _STD, N.MOVW: _MOVW, N.PUSH: _PUSH, N.POP: _POP, N.ADD: _ADD,
    N.ADC: _ADC, N.SUB: _SUB, N.SBC: _SBC, N.CP: _CP, N.CPC: _CPC, N.BR_COND: _BR,
    N.RJMP: _RJMP, N.LDI: _LDI, N.MOV: _MOV, N.AND: _AND, N.OR: _OR, N.EOR: _EOR, N.INC: _INC,
    N.DEC: _DEC, N.LSR: _LSR, N.LSL: _LSL, N.ROL: _ROL, N.ROR: _ROR, N.ASR: _ASR,
    N.ADIW: _ADIW, N.SBIW: _SBIW, N.MUL: _MUL, N.MULS: _MULS, N.LD_INC: _LD_INC,
    N.LD_DEC: _LD_DEC, N.ST_INC: _ST_INC, N.ST_DEC: _ST_DEC, N.JMP: _JMP, N.CALL: _CALL,
    N.RET: _RET, N.IJMP: _IJMP, N.NOP: _NOP, N.BREAK: _BREAK,
}
_PTR = {"X": 26, "Y": 28, "Z": 30, None: 0}
_COND = {c: i for i, c in enumerate(BranchCondition)}
_C_EQ, _C_NE, _C_LT, _C_GE, _C_LO, _C_SH, _C_PL, _C_MI = (
    _COND[BranchCondition.EQ], _COND[BranchCondition.NE], _COND[BranchCondition.LT_S],
    _COND[BranchCondition.GE_S], _COND[BranchCondition.LT_U], _COND[BranchCondition.GE_U],
    _COND[BranchCondition.PL], _COND[BranchCondition.MI])


class MachineError(RuntimeError):
    pass


class WatchdogExpired(MachineError):
    pass


@dataclass
class TraceRow:
    pc: int
    opcode: str
    category: str
    cycles: int
    taken: bool


@dataclass
class RunResult:
    outcome: RunOutcome
    cycles: int
    instructions: int
    category_cycles: dict
    helper_cycles: dict
    counts: list                 # executions per word address (index = address)
    taken: list
    trace: Optional[list] = None

    @property
    def value(self):
        return self.outcome.value

    @property
    def state(self) -> bytes:
        return self.outcome.state

    def write_trace_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["pc", "opcode", "category", "cycles", "taken"])
            for r in self.trace or ():
                w.writerow([r.pc, r.opcode, r.category, r.cycles, int(r.taken)])

    def summary(self) -> dict:
        return {
            "cycles": self.cycles,
            "instructions": self.instructions,
            "category_cycles": self.category_cycles,
            "helper_cycles": {k: v for k, v in self.helper_cycles.items()},
            "return_value": self.outcome.value,
            "error": self.outcome.error,
        }

    def write_summary_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2)


def _decode(image: CodeImage) -> tuple:
    """Flat tables indexed by word address."""
    size = image.size_words
    prog = [None] * size
    cost = [0] * size
    cats = [""] * size
    a = 0
    for ins in image.code:
        prog[a] = (_CODE[ins.opcode], ins.rd or 0, ins.rs or 0, ins.imm or 0,
                   ins.displacement or 0, _COND.get(ins.cond, -1), ins.target or 0,
                   _PTR[ins.ptr], word_size(ins))
        cost[a] = cycle_cost(ins)
        cats[a] = category(ins)
        a += word_size(ins)
    return prog, cost, cats


class Machine:
    """Runs a :class:`CodeImage`; create once, run many inputs."""

    def __init__(self, image: CodeImage, ram_size: int = RAM_SIZE,
                 max_steps: int = DEFAULT_MAX_STEPS):
        self.image = image
        self.ram_size = ram_size
        self.max_steps = max_steps
        self.prog, self.cost, self.cats = _decode(image)
        self._chain_len = {}
        self._int_slots = {}
        classes = image.classes
        by_name = {c["name"]: i for i, c in enumerate(classes)}
        for i, c in enumerate(classes):
            n, ints, refs, name = 0, 0, 0, c["name"]
            while name is not None:
                cc = classes[by_name[name]]
                n += 1
                ints += cc["int_fields"]
                refs += cc["ref_fields"]
                name = cc["parent"]
            self._chain_len[i] = n
            self._int_slots[i] = (ints, refs)

    # ------------------------------------------------------------------
    def run(self, inp: ProgramInput = ProgramInput(), trace: bool = False) -> RunResult:
        img = self.image
        heap = Heap(img.static_int_slots, img.static_ref_slots, self.ram_size)
        mem = heap.ram
        regs = [0] * 32
        entry = img.methods[img.entry]
        ftop = frame_top(self.ram_size)
        boot_x = ftop - BOOT_REF_BYTES
        args = materialise_args(heap, entry.params, inp)
        sp = self.ram_size - 1
        x = boot_x
        for t, v in zip(entry.params, args):
            if t == "A":
                mem[x] = v & 0xFF
                mem[x + 1] = v >> 8
                x += 2
                continue
            elems = [v & 0xFFFF] if t == "S" else [v >> 16, v & 0xFFFF]
            for e in elems:
                mem[sp] = e >> 8
                mem[sp - 1] = e & 0xFF
                sp -= 2
        regs[26], regs[27] = x & 0xFF, x >> 8
        regs[28], regs[29] = boot_x & 0xFF, boot_x >> 8
        self.frames = []
        self.fp = boot_x
        self.heap = heap
        self.helper_cycles = Counter()
        counts = [0] * len(self.prog)
        taken = [0] * len(self.prog)
        rows = [] if trace else None
        error = None
        try:
            steps = self._execute(regs, mem, sp, counts, taken, rows, ftop)
        except Trap as exc:
            error = str(exc)
            steps = sum(counts)
        except IndexError as exc:
            error = f"memory access out of range ({exc})"
            steps = sum(counts)
        cycles, by_cat = self._account(counts, taken)
        value = None
        if error is None and entry.returns != "V":
            if entry.returns == "S":
                value = to_signed(regs[24] | regs[25] << 8, 16)
            elif entry.returns == "I":
                value = to_signed(regs[22] | regs[23] << 8 | regs[24] << 16 | regs[25] << 24, 32)
            else:
                value = regs[24] | regs[25] << 8
        outcome = RunOutcome(value, heap.state() if error is None else b"", error)
        return RunResult(outcome, cycles, steps, by_cat, dict(self.helper_cycles), counts, taken,
                         rows)

    def _account(self, counts, taken) -> tuple:
        by_cat = {c: 0 for c in CATEGORIES}
        total = 0
        cost, cats = self.cost, self.cats
        for a, n in enumerate(counts):
            if n:
                c = n * cost[a] + taken[a]
                total += c
                by_cat[cats[a]] += c
        h = sum(self.helper_cycles.values())
        by_cat["other"] += h
        return total + h, by_cat

    # ------------------------------------------------------------------
    def _execute(self, regs, mem, sp, counts, taken, rows, ftop) -> int:
        prog, cost = self.prog, self.cost
        nprog = len(prog)
        limit = self.max_steps
        stack_floor = ftop
        c = z = n = v = s = 0
        pc = 0
        steps = 0
        while True:
            if pc >= nprog:
                if pc >= HELPER_BASE:
                    pc, sp = self._helper(pc, regs, mem, sp)
                    continue
                raise Trap(f"jump outside code at {pc:#x}")
            steps += 1
            if steps > limit:
                raise WatchdogExpired(f"watchdog: more than {limit} instructions")
            ins = prog[pc]
            if ins is None:
                raise Trap(f"jump into the middle of an instruction at {pc:#x}")
            counts[pc] += 1
            op, rd, rs, imm, disp, cond, target, ptr, size = ins
            br_taken = False
            at = pc
            pc += size
            if op == _LDD:
                regs[rd] = mem[(regs[ptr] | regs[ptr + 1] << 8) + disp]
            elif op == _STD:
                mem[(regs[ptr] | regs[ptr + 1] << 8) + disp] = regs[rs]
            elif op == _MOVW:
                regs[rd] = regs[rs]
                regs[rd + 1] = regs[rs + 1]
            elif op == _PUSH:
                if sp < stack_floor:
                    raise Trap("native stack overflow")
                mem[sp] = regs[rd]
                sp -= 1
            elif op == _POP:
                sp += 1
                regs[rd] = mem[sp]
            elif op == _ADD or op == _ADC:
                a = regs[rd]
                b = regs[rs]
                r = a + b + (c if op == _ADC else 0)
                c = r >> 8
                r &= 0xFF
                regs[rd] = r
                z = r == 0
                n = r >> 7
                v = ((a ^ r) & (b ^ r)) >> 7
                s = n ^ v
            elif op == _SUB or op == _SBC or op == _CP or op == _CPC:
                a = regs[rd]
                b = regs[rs]
                carry = c if (op == _SBC or op == _CPC) else 0
                r = a - b - carry
                c = 1 if r < 0 else 0
                r &= 0xFF
                if op == _SBC or op == _CPC:
                    z = z and r == 0
                else:
                    z = r == 0
                n = r >> 7
                v = ((a ^ b) & (a ^ r)) >> 7
                s = n ^ v
                if op == _SUB or op == _SBC:
                    regs[rd] = r
            elif op == _BR:
                if cond == _C_EQ:
                    br_taken = z
                elif cond == _C_NE:
                    br_taken = not z
                elif cond == _C_LT:
                    br_taken = s
                elif cond == _C_GE:
                    br_taken = not s
                elif cond == _C_LO:
                    br_taken = c
                elif cond == _C_SH:
                    br_taken = not c
                elif cond == _C_PL:
                    br_taken = not n
                else:
                    br_taken = n
                if br_taken:
                    taken[at] += 1
                    pc += imm
            elif op == _RJMP:
                pc += imm
            elif op == _LDI:
                regs[rd] = imm
            elif op == _MOV:
                regs[rd] = regs[rs]
            elif op == _AND or op == _OR or op == _EOR:
                if op == _AND:
                    r = regs[rd] & regs[rs]
                elif op == _OR:
                    r = regs[rd] | regs[rs]
                else:
                    r = regs[rd] ^ regs[rs]
                regs[rd] = r
                z = r == 0
                n = r >> 7
                v = 0
                s = n
            elif op == _INC:
                r = (regs[rd] + 1) & 0xFF
                regs[rd] = r
                z = r == 0
                n = r >> 7
                v = 1 if r == 0x80 else 0
                s = n ^ v
            elif op == _DEC:
                r = (regs[rd] - 1) & 0xFF
                regs[rd] = r
                z = r == 0
                n = r >> 7
                v = 1 if r == 0x7F else 0
                s = n ^ v
            elif op == _LSR:
                a = regs[rd]
                c = a & 1
                r = a >> 1
                regs[rd] = r
                z = r == 0
                n = 0
                v = c
                s = c
            elif op == _LSL or op == _ROL:
                a = regs[rd]
                r = ((a << 1) | (c if op == _ROL else 0)) & 0xFF
                c = a >> 7
                regs[rd] = r
                z = r == 0
                n = r >> 7
                v = n ^ c
                s = n ^ v
            elif op == _ROR or op == _ASR:
                a = regs[rd]
                hi = (c << 7) if op == _ROR else (a & 0x80)
                c = a & 1
                r = (a >> 1) | hi
                regs[rd] = r
                z = r == 0
                n = r >> 7
                v = n ^ c
                s = n ^ v
            elif op == _ADIW or op == _SBIW:
                a = regs[rd] | regs[rd + 1] << 8
                if op == _ADIW:
                    r = a + imm
                    c = r >> 16
                    r &= 0xFFFF
                    v = (~a & r) >> 15 & 1
                else:
                    r = a - imm
                    c = 1 if r < 0 else 0
                    r &= 0xFFFF
                    v = (a & ~r) >> 15 & 1
                regs[rd] = r & 0xFF
                regs[rd + 1] = r >> 8
                z = r == 0
                n = r >> 15
                s = n ^ v
            elif op == _MUL or op == _MULS:
                if op == _MUL:
                    r = regs[rd] * regs[rs]
                else:
                    r = (to_signed(regs[rd], 8) * to_signed(regs[rs], 8)) & 0xFFFF
                regs[0] = r & 0xFF
                regs[1] = r >> 8
                c = r >> 15
                z = r == 0
            elif op == _LD_INC or op == _LD_DEC or op == _ST_INC or op == _ST_DEC:
                a = regs[ptr] | regs[ptr + 1] << 8
                if op == _LD_DEC or op == _ST_DEC:
                    a = (a - 1) & 0xFFFF
                    regs[ptr], regs[ptr + 1] = a & 0xFF, a >> 8
                if op == _LD_INC or op == _LD_DEC:
                    regs[rd] = mem[a]
                else:
                    mem[a] = regs[rs]
                if op == _LD_INC or op == _ST_INC:
                    a = (a + 1) & 0xFFFF
                    regs[ptr], regs[ptr + 1] = a & 0xFF, a >> 8
            elif op == _CALL:
                if sp < stack_floor:
                    raise Trap("native stack overflow")
                mem[sp] = pc >> 8
                mem[sp - 1] = pc & 0xFF
                sp -= 2
                pc = target
            elif op == _RET:
                pc = mem[sp + 1] | mem[sp + 2] << 8
                sp += 2
            elif op == _JMP:
                pc = target
            elif op == _IJMP:
                pc = regs[30] | regs[31] << 8
            elif op == _NOP:
                pass
            elif op == _BREAK:
                if rows is not None:
                    rows.append(TraceRow(at, "BREAK", self.cats[at], cost[at], False))
                return steps
            if rows is not None:
                rows.append(TraceRow(at, self.image_name(at), self.cats[at],
                                     cost[at] + (1 if br_taken else 0), bool(br_taken)))

    def image_name(self, at: int) -> str:
        op = self.prog[at][0]
        return _NAMES[op]

    # ------------------------------------------------------------------
    # helpers
    def _charge(self, h: Helper, extra: int = 0) -> None:
        self.helper_cycles[h.name] += HELPER_COST[h] + extra

    def _pop_ret(self, mem, sp) -> tuple:
        return mem[sp + 1] | mem[sp + 2] << 8, sp + 2

    def _helper(self, pc, regs, mem, sp) -> tuple:
        h = Helper.at(pc)
        if h is None:
            raise Trap(f"call to unknown helper address {pc:#x}")
        heap = self.heap
        if h is Helper.TRAMPOLINE:
            # reached by the callee's RET, not by a CALL
            self._charge(h)
            if not self.frames:
                raise Trap("return with no active frame")
            ret_pc, y, x, sp_after, fp = self.frames.pop()
            self.fp = fp
            regs[28], regs[29] = y & 0xFF, y >> 8
            regs[26], regs[27] = x & 0xFF, x >> 8
            return ret_pc, sp_after
        ret, sp = self._pop_ret(mem, sp)
        if h is Helper.PREINVOKE or h is Helper.POSTINVOKE:
            self._charge(h)
            return ret, sp
        if h is Helper.CALL_METHOD:
            return self._call_method(ret, regs, mem, sp)
        if h is Helper.SIMUL:
            self._charge(h)
            r = (to_signed(regs[0] | regs[1] << 8, 16) * to_signed(regs[30] | regs[31] << 8, 16))
            r &= 0xFFFFFFFF
            regs[0], regs[1], regs[30], regs[31] = r & 0xFF, (r >> 8) & 0xFF, (r >> 16) & 0xFF, r >> 24
            return ret, sp
        if h in (Helper.SDIV, Helper.SREM):
            self._charge(h)
            a = to_signed(regs[0] | regs[1] << 8, 16)
            b = to_signed(regs[30] | regs[31] << 8, 16)
            r = java_div(a, b, 16) if h is Helper.SDIV else java_rem(a, b, 16)
            regs[0], regs[1] = r & 0xFF, (r >> 8) & 0xFF
            return ret, sp
        if h in (Helper.IDIV, Helper.IREM):
            self._charge(h)
            dl, dh, bl, bh = regs[30], regs[31], regs[0], regs[1]
            a = to_signed(regs[dl] | regs[dl + 1] << 8 | regs[dh] << 16 | regs[dh + 1] << 24, 32)
            b = to_signed(regs[bl] | regs[bl + 1] << 8 | regs[bh] << 16 | regs[bh + 1] << 24, 32)
            r = (java_div(a, b, 32) if h is Helper.IDIV else java_rem(a, b, 32)) & 0xFFFFFFFF
            regs[dl], regs[dl + 1] = r & 0xFF, (r >> 8) & 0xFF
            regs[dh], regs[dh + 1] = (r >> 16) & 0xFF, r >> 24
            return ret, sp
        x = regs[26] | regs[27] << 8
        if h is Helper.NEW:
            ci = regs[30] | regs[31] << 8
            ints, refs = self._int_slots[ci]
            heap.limit = self.fp
            addr = heap.new_object(ci, ints, refs)
            self._charge(h, NEWARRAY_BYTE_COST * (1 + ints + refs))
            x = self._xpush(regs, mem, x, addr)
            return ret, sp
        if h is Helper.NEWARRAY:
            count = to_signed(regs[30] | regs[31] << 8, 16)
            kind = KIND_OF_CODE[regs[0]]
            heap.limit = self.fp
            addr = heap.new_array(kind, count)
            self._charge(h, NEWARRAY_BYTE_COST * ((2 + max(count, 0) * ELEMENT_SIZE[kind]) // 2))
            self._xpush(regs, mem, x, addr)
            return ret, sp
        if h is Helper.GETFIELD_A:
            k = regs[0]
            x -= 2
            obj = mem[x] | mem[x + 1] << 8
            off = self._ref_field_offset(obj, k, h)
            val = heap.u16(obj + off)
            mem[x], mem[x + 1] = val & 0xFF, val >> 8
            return ret, sp
        if h is Helper.PUTFIELD_A:
            k = regs[0]
            val = mem[x - 2] | mem[x - 1] << 8
            obj = mem[x - 4] | mem[x - 3] << 8
            x -= 4
            regs[26], regs[27] = x & 0xFF, x >> 8
            off = self._ref_field_offset(obj, k, h)
            heap.put16(obj + off, val)
            return ret, sp
        raise Trap(f"unhandled helper {h.name}")

    def _xpush(self, regs, mem, x, value) -> int:
        mem[x], mem[x + 1] = value & 0xFF, value >> 8
        x += 2
        regs[26], regs[27] = x & 0xFF, x >> 8
        return x

    def _ref_field_offset(self, obj: int, k: int, h: Helper) -> int:
        if obj == 0:
            raise Trap("null reference")
        ci = self.heap.u16(obj)
        if ci not in self._int_slots:
            raise Trap(f"bad object header at {obj:#x}")
        self._charge(h, FIELD_CHAIN_STEP_COST * self._chain_len[ci])
        return 2 + 2 * self._int_slots[ci][0] + 2 * k

    def _call_method(self, ret, regs, mem, sp) -> tuple:
        index = regs[24] | regs[25] << 8
        if index >= len(self.image.methods):
            raise Trap(f"invoke of unknown method index {index}")
        m = self.image.methods[index]
        words = (regs[22] | regs[23] << 8) // 2
        nrefs = (regs[20] | regs[21] << 8) // 2
        self._charge(Helper.CALL_METHOD, PARAM_WORD_COST * (words + nrefs))
        # native stack: elements bottom to top, each [lo, hi] from SP+1 upward
        order = []
        slot = 0
        for t in m.params:
            if t == "S":
                order.append(slot)
                slot += 1
            elif t == "I":
                order += [slot + 1, slot]
                slot += 2
        values = {}
        a = sp + 1
        for s_ in reversed(order):
            values[s_] = mem[a] | mem[a + 1] << 8
            a += 2
        sp = a - 1
        x = regs[26] | regs[27] << 8
        x -= 2 * nrefs
        refs = [mem[x + 2 * i] | mem[x + 2 * i + 1] << 8 for i in range(nrefs)]
        y_new = self.fp - m.frame_size
        if y_new < self.heap.top:
            raise Trap("out of memory (frames)")
        mem[y_new:self.fp] = bytes(self.fp - y_new)
        for s_, val in values.items():
            o = y_new + m.int_base + 2 * s_
            mem[o], mem[o + 1] = val & 0xFF, val >> 8
        for i, val in enumerate(refs):
            o = y_new + m.ref_base + 2 * i
            mem[o], mem[o + 1] = val & 0xFF, val >> 8
        y_old = regs[28] | regs[29] << 8
        self.frames.append((ret, y_old, x, sp, self.fp))
        self.fp = y_new
        self.heap.limit = y_new
        regs[28], regs[29] = y_new & 0xFF, y_new >> 8
        xn = y_new + m.ref_stack_base
        regs[26], regs[27] = xn & 0xFF, xn >> 8
        t = Helper.TRAMPOLINE.address
        mem[sp] = t >> 8
        mem[sp - 1] = t & 0xFF
        sp -= 2
        return m.address, sp


_NAMES = {v: k.value for k, v in _CODE.items()}


def java_div(a: int, b: int, bits: int) -> int:
    if b == 0:
        raise Trap("division by zero")
    q = abs(a) // abs(b)
    q = -q if (a < 0) != (b < 0) else q
    return to_signed(q, bits)


def java_rem(a: int, b: int, bits: int) -> int:
    if b == 0:
        raise Trap("division by zero")
    r = abs(a) % abs(b)
    return to_signed(-r if a < 0 else r, bits)


def run_image(image: CodeImage, inp: ProgramInput = ProgramInput(), trace: bool = False,
              max_steps: int = DEFAULT_MAX_STEPS) -> RunResult:
    return Machine(image, max_steps=max_steps).run(inp, trace)
