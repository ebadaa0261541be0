"""Runtime helper routines: addresses and metered cycle costs.

Helpers live at fixed flash addresses above ``HELPER_BASE``.  Generated
code reaches them with an ordinary ``CALL``; the simulator recognises the
address, runs the Python implementation and charges the documented cost
(which includes the helper's own ``RET``) to the "other" category.

Costs are our calibration; the call envelope they produce for a
zero-argument static invoke is about 550 cycles.
"""

from __future__ import annotations

import enum

from .layout import HELPER_BASE


class Helper(enum.IntEnum):
    PREINVOKE = 0
    CALL_METHOD = 1
    TRAMPOLINE = 2
    POSTINVOKE = 3
    SIMUL = 4
    SDIV = 5
    SREM = 6
    IDIV = 7
    IREM = 8
    NEW = 9
    NEWARRAY = 10
    GETFIELD_A = 11
    PUTFIELD_A = 12

    @property
    def address(self) -> int:
        return HELPER_BASE + 2 * int(self)

    @classmethod
    def at(cls, address: int):
        if address < HELPER_BASE or (address - HELPER_BASE) % 2:
            return None
        try:
            return cls((address - HELPER_BASE) // 2)
        except ValueError:
            return None


# fixed part of each helper's cost in cycles
HELPER_COST = {
    Helper.PREINVOKE: 20,       # save native SP and X
    Helper.CALL_METHOD: 450,    # allocate, initialise and activate a frame
    Helper.TRAMPOLINE: 30,      # return path: reactivate the caller frame
    Helper.POSTINVOKE: 20,      # restore native SP and X
    Helper.SIMUL: 24,
    Helper.SDIV: 220,
    Helper.SREM: 220,
    Helper.IDIV: 600,
    Helper.IREM: 600,
    Helper.NEW: 60,
    Helper.NEWARRAY: 60,
    Helper.GETFIELD_A: 30,
    Helper.PUTFIELD_A: 30,
}
PARAM_WORD_COST = 8            # callMethod, per 16-bit parameter word
NEWARRAY_BYTE_COST = 1         # zeroing, per pair of bytes
FIELD_CHAIN_STEP_COST = 12     # non-fixed ref field lookup, per class in the chain
