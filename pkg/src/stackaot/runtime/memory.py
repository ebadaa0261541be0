"""Data memory shared by the simulator and the reference interpreter.

Both executors place statics, arrays and objects at identical addresses,
so a run's observable result is simply the bytes from the first static
slot to the heap end plus the entry method's return value.

Object layout::  [u16 class index][int field slots][ref fields]
Array layout::   [u16 length][elements]
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from ..bytecode.opcodes import ELEMENT_SIZE, KIND_CODE
from .layout import BOOT_REF_BYTES, RAM_SIZE, STATIC_BASE, frame_top, heap_base

KIND_OF_CODE = {v: k for k, v in KIND_CODE.items()}


class Trap(RuntimeError):
    """A program fault: bad memory access, division by zero, out of memory."""


@dataclass
class ArrayArg:
    """An array built before the run and passed as a reference argument."""

    kind: str                        # B, S, I (A arrays are filled with null)
    values: Sequence[int] = ()


@dataclass
class ProgramInput:
    args: tuple = ()                 # one value per entry parameter
    label: str = ""


@dataclass
class RunOutcome:
    value: Optional[int]             # signed return value, reference address, or None
    state: bytes                     # statics and heap
    error: Optional[str] = None

    def same_as(self, other: "RunOutcome") -> bool:
        if self.error or other.error:
            return self.error == other.error
        return self.value == other.value and self.state == other.state


def to_signed(value: int, bits: int) -> int:
    value &= (1 << bits) - 1
    return value - (1 << bits) if value >> (bits - 1) else value


class Heap:
    """Static area plus a bump allocator over a RAM byte array."""

    def __init__(self, static_int_slots: int, static_ref_slots: int, ram_size: int = RAM_SIZE):
        self.ram = bytearray(ram_size)
        self.ram_size = ram_size
        self.base = heap_base(static_int_slots, static_ref_slots)
        self.top = self.base
        # the frame region (simulator) or nothing (interpreter) sets this lower
        self.limit = frame_top(ram_size) - BOOT_REF_BYTES

    def alloc(self, nbytes: int) -> int:
        addr = self.top
        if addr + nbytes > self.limit:
            raise Trap("out of memory")
        self.ram[addr:addr + nbytes] = bytes(nbytes)
        self.top += nbytes
        return addr

    def u16(self, addr: int) -> int:
        if not 0 <= addr < self.ram_size - 1:
            raise Trap(f"memory access out of range at {addr:#x}")
        return self.ram[addr] | (self.ram[addr + 1] << 8)

    def put16(self, addr: int, value: int) -> None:
        if not 0 <= addr < self.ram_size - 1:
            raise Trap(f"memory access out of range at {addr:#x}")
        self.ram[addr] = value & 0xFF
        self.ram[addr + 1] = (value >> 8) & 0xFF

    def new_array(self, kind: str, count: int) -> int:
        if count < 0:
            raise Trap("negative array size")
        addr = self.alloc(2 + count * ELEMENT_SIZE[kind])
        self.put16(addr, count)
        return addr

    def new_object(self, class_index: int, int_slots: int, ref_fields: int) -> int:
        addr = self.alloc(2 + 2 * int_slots + 2 * ref_fields)
        self.put16(addr, class_index)
        return addr

    def fill_array(self, addr: int, kind: str, values: Sequence[int]) -> None:
        size = ELEMENT_SIZE[kind]
        for i, v in enumerate(values):
            a = addr + 2 + i * size
            for k in range(size):
                self.ram[a + k] = (v >> (8 * k)) & 0xFF

    def state(self) -> bytes:
        return bytes(self.ram[STATIC_BASE:self.top])


def materialise_args(heap: Heap, params: str, inp: ProgramInput) -> list:
    """Allocate array arguments; returns one int/ref value per parameter."""
    if len(inp.args) != len(params):
        raise ValueError(f"entry takes {len(params)} argument(s), got {len(inp.args)}")
    out = []
    for t, a in zip(params, inp.args):
        if t == "A":
            if a is None:
                out.append(0)
            elif isinstance(a, ArrayArg):
                addr = heap.new_array(a.kind, len(a.values))
                if a.kind != "A":
                    heap.fill_array(addr, a.kind, a.values)
                out.append(addr)
            else:
                raise ValueError(f"reference argument must be an ArrayArg or None, got {a!r}")
        elif t == "S":
            out.append(int(a) & 0xFFFF)
        else:
            out.append(int(a) & 0xFFFFFFFF)
    return out


def shift_count(count: int) -> int:
    """Effective count of a variable shift: the low byte, if at most 128, else 0."""
    c = count & 0xFF
    return c if c <= 128 else 0
