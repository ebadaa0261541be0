"""Emission buffer shared by the code generator, cache manager and fixups."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

from ..isa import BranchCondition, BranchTag, NativeInstruction, NativeOpcode

N = NativeOpcode


@dataclass(frozen=True)
class Label:
    """Position of a branch target inside emitted code (zero size)."""

    id: int


@dataclass
class Item:
    instr: Union[NativeInstruction, BranchTag, Label]
    bc: int = -1        # bytecode index that produced it (-1: method prologue)


class Emitter:
    def __init__(self):
        self.items: list = []
        self.bc = -1

    def emit(self, instr) -> None:
        self.items.append(Item(instr, self.bc))

    # shorthand constructors -------------------------------------------------
    def op(self, opcode: NativeOpcode, **kw) -> None:
        self.emit(NativeInstruction(opcode, **kw))

    def rr(self, opcode: NativeOpcode, rd: int, rs: int) -> None:
        self.emit(NativeInstruction(opcode, rd=rd, rs=rs))

    def r(self, opcode: NativeOpcode, rd: int) -> None:
        self.emit(NativeInstruction(opcode, rd=rd))

    def movw(self, rd: int, rs: int) -> None:
        if rd != rs:
            self.emit(NativeInstruction(N.MOVW, rd=rd, rs=rs))

    def ldi(self, rd: int, value: int) -> None:
        self.emit(NativeInstruction(N.LDI, rd=rd, imm=value & 0xFF))

    def ldi16(self, pair: int, value: int) -> None:
        self.ldi(pair, value)
        self.ldi(pair + 1, value >> 8)

    def ldd(self, rd: int, ptr: str, disp: int) -> None:
        self.emit(NativeInstruction(N.LDD, rd=rd, ptr=ptr, displacement=disp))

    def std(self, ptr: str, disp: int, rs: int) -> None:
        self.emit(NativeInstruction(N.STD, rs=rs, ptr=ptr, displacement=disp))

    def ldd16(self, pair: int, ptr: str, disp: int) -> None:
        self.ldd(pair, ptr, disp)
        self.ldd(pair + 1, ptr, disp + 1)

    def std16(self, ptr: str, disp: int, pair: int) -> None:
        self.std(ptr, disp, pair)
        self.std(ptr, disp + 1, pair + 1)

    def pushw(self, pair: int) -> None:
        self.r(N.PUSH, pair + 1)
        self.r(N.PUSH, pair)

    def popw(self, pair: int) -> None:
        self.r(N.POP, pair)
        self.r(N.POP, pair + 1)

    def call(self, target: int) -> None:
        self.emit(NativeInstruction(N.CALL, target=target))

    def branch(self, label: int, cond: Optional[BranchCondition] = None) -> None:
        self.emit(BranchTag(label, cond))

    def label(self, label: int) -> None:
        self.emit(Label(label))

    def mark(self) -> int:
        return len(self.items)

    def since(self, mark: int) -> list:
        return self.items[mark:]
