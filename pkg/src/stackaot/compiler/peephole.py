"""Push/pop elimination over emitted code.

Both passes work on 16-bit register pairs: a *push* is ``PUSH r(a+1);
PUSH ra`` and a *pop* is ``POP rb; POP r(b+1)``, the shapes the stack
managers always emit.
"""

from __future__ import annotations

from ..isa import BranchTag, NativeInstruction, NativeOpcode
from .emit import Item, Label

N = NativeOpcode

_BARRIERS = {N.RJMP, N.BR_COND, N.JMP, N.CALL, N.RET, N.IJMP, N.BREAK}
_NO_WRITE = {N.PUSH, N.ST_INC, N.ST_DEC, N.STD, N.CP, N.CPC, N.RJMP, N.BR_COND, N.JMP,
             N.CALL, N.RET, N.IJMP, N.NOP, N.BREAK}
_PTR_REGS = {"X": (26, 27), "Y": (28, 29), "Z": (30, 31)}


def registers(instr: NativeInstruction) -> tuple:
    """(registers read, registers written) by one instruction, over-approximated."""
    op = instr.opcode
    reads, writes = set(), set()
    if op is N.MOVW:
        reads |= {instr.rs, instr.rs + 1}
        writes |= {instr.rd, instr.rd + 1}
        return reads, writes
    if op in (N.ADIW, N.SBIW):
        reads |= {instr.rd, instr.rd + 1}
        writes |= {instr.rd, instr.rd + 1}
        return reads, writes
    if op in (N.MUL, N.MULS):
        return {instr.rd, instr.rs}, {0, 1}
    if instr.rs is not None:
        reads.add(instr.rs)
    if instr.rd is not None:
        if op not in (N.LDI, N.MOV, N.POP, N.LD_INC, N.LD_DEC, N.LDD):
            reads.add(instr.rd)
        if op not in _NO_WRITE:
            writes.add(instr.rd)
    if instr.ptr is not None:
        reads |= set(_PTR_REGS[instr.ptr])
        if op in (N.LD_INC, N.LD_DEC, N.ST_INC, N.ST_DEC):
            writes |= set(_PTR_REGS[instr.ptr])
    return reads, writes


def _pair_at(items: list, i: int, opcode: NativeOpcode):
    """Pair register if items[i:i+2] is a 16-bit push (or pop) pattern."""
    if i + 1 >= len(items):
        return None
    a, b = items[i].instr, items[i + 1].instr
    if not (isinstance(a, NativeInstruction) and isinstance(b, NativeInstruction)):
        return None
    if a.opcode is not opcode or b.opcode is not opcode:
        return None
    if opcode is N.PUSH and a.rd % 2 == 1 and b.rd == a.rd - 1:
        return b.rd
    if opcode is N.POP and a.rd % 2 == 0 and b.rd == a.rd + 1:
        return a.rd
    return None


def _replacement(push_item: Item, src: int, dst: int) -> list:
    if src == dst:
        return []
    return [Item(NativeInstruction(N.MOVW, rd=dst, rs=src), push_item.bc)]


def peephole_basic(items: list) -> list:
    """Remove adjacent push/pop pairs, or turn them into a MOVW."""
    out: list = []
    i = 0
    while i < len(items):
        src = _pair_at(items, i, N.PUSH)
        if src is not None:
            dst = _pair_at(items, i + 2, N.POP)
            if dst is not None:
                out.extend(_replacement(items[i], src, dst))
                i += 4
                continue
        out.append(items[i])
        i += 1
    return out if len(out) == len(items) else peephole_basic(out)


def _window_ok(window: list, dst: int) -> bool:
    """Balanced, branch-free, and never touches the destination pair."""
    depth = 0
    forbidden = {dst, dst + 1}
    for item in window:
        ins = item.instr
        if isinstance(ins, (Label, BranchTag)):
            return False
        if ins.opcode in _BARRIERS:
            return False
        if ins.opcode is N.PUSH:
            depth += 1
        elif ins.opcode is N.POP:
            depth -= 1
            if depth < 0:
                return False
        reads, writes = registers(ins)
        if (reads | writes) & forbidden:
            return False
    return depth == 0


def peephole_improved(items: list) -> list:
    """Also pair non-adjacent pushes and pops across a safe window; to fixpoint."""
    items = list(items)
    changed = True
    while changed:
        changed = False
        i = 0
        while i < len(items):
            src = _pair_at(items, i, N.PUSH)
            if src is None:
                i += 1
                continue
            # find the matching pop: first point where the byte depth returns to zero
            depth = 0
            j = i + 2
            match = None
            while j < len(items):
                ins = items[j].instr
                if isinstance(ins, (Label, BranchTag)) or ins.opcode in _BARRIERS:
                    break
                if ins.opcode is N.PUSH:
                    depth += 1
                elif ins.opcode is N.POP:
                    if depth == 0:
                        match = j
                        break
                    depth -= 1
                j += 1
            dst = _pair_at(items, match, N.POP) if match is not None else None
            if dst is not None and _window_ok(items[i + 2:match], dst):
                items = (items[:i] + _replacement(items[i], src, dst) + items[i + 2:match]
                         + items[match + 2:])
                changed = True
                continue
            i += 1
    return items
