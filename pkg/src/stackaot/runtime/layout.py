"""Memory map, register roles and frame layout shared by compiler and runtime.

RAM (default 4096 bytes)::

    0 .. 15            unused (address 0 is null)
    16 ..              static int slots, then static ref slots
    ..                 heap, bump allocated upwards
    ..  FRAME_TOP      frames, allocated downwards
    FRAME_TOP .. end   native stack (512 bytes), grows downwards

Frame of method ``m`` relative to Y::

    [lightweight area][return slot (nested lw only)][int locals][ref locals][ref stack]

The lightweight area is where lightweight callees keep their locals; it
sits at Y+0 so a callee can address its own locals with fixed
displacements without moving Y.  Lightweight methods have no frame of
their own, only the part of this layout up to the ref locals.
"""

from __future__ import annotations

from dataclasses import dataclass

RAM_SIZE = 4096
NATIVE_STACK_BYTES = 512
STATIC_BASE = 16
BOOT_REF_BYTES = 32
HELPER_BASE = 0xF000

# register roles
SCRATCH = 0            # r0:r1, also MUL result
LW_RETURN = 18         # r18:r19, return address of a leaf lightweight method
X_REG, Y_REG, Z_REG = 26, 28, 30
CACHE_PAIRS = (2, 4, 6, 8, 10, 12, 14, 16, 20, 22, 24)
RESERVED = (0, 1, 18, 19, 26, 27, 28, 29, 30, 31)
MAX_PINNED = 7
RET_SHORT = 24         # short / ref result, int high half
RET_INT_LO = 22        # int low half


def frame_top(ram_size: int = RAM_SIZE) -> int:
    return ram_size - NATIVE_STACK_BYTES


def static_int_addr(slot: int) -> int:
    return STATIC_BASE + 2 * slot


def static_ref_addr(inf_static_int_slots: int, slot: int) -> int:
    return STATIC_BASE + 2 * inf_static_int_slots + 2 * slot


def heap_base(static_int_slots: int, static_ref_slots: int) -> int:
    return STATIC_BASE + 2 * (static_int_slots + static_ref_slots)


@dataclass(frozen=True)
class FrameLayout:
    """Byte offsets relative to Y for one method."""

    lw_area: int           # bytes reserved for lightweight callees
    ret_slot: int          # offset of the saved return address, -1 if none
    int_base: int
    ref_base: int
    ref_stack_base: int    # normal methods only
    size: int              # total frame bytes (normal methods)

    def int_slot(self, slot: int) -> int:
        return self.int_base + 2 * slot

    def ref_slot(self, slot: int) -> int:
        return self.ref_base + 2 * slot


def frame_layout(method) -> FrameLayout:
    lw_area = 2 * method.lw_frame_reserve
    nested_lw = method.lightweight and method.nested
    ret_slot = lw_area if nested_lw else -1
    int_base = lw_area + (2 if nested_lw else 0)
    ref_base = int_base + 2 * method.local_int_slots
    ref_stack_base = ref_base + 2 * method.local_ref_slots
    size = ref_stack_base
    if not method.lightweight:
        size += 2 * (method.max_ref_stack + method.lw_ref_reserve)
    return FrameLayout(lw_area, ret_slot, int_base, ref_base, ref_stack_base, size)
