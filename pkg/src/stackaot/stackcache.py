"""Register managers for the operand stack.

Two managers share one interface so the code generator's per-opcode
recipes are written once:

* :class:`BaselineStack` keeps every stack element in memory; ``push``
  and ``pop`` emit real PUSH/POP instructions into fixed registers.
* :class:`CacheManager` keeps the top of the stack in register pairs,
  optionally remembers which variable or constant each register holds
  (value tags) and pins loop variables to registers.

A stack element is one 16-bit value held in a register pair (named by its
even register).  A 32-bit value is two elements, high half deeper.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .bytecode.model import DataType, LoopVar, MarkLoop, TagType, ValueTag, instr_tags
from .bytecode.opcodes import Op, TagUse
from .compiler.emit import N, Emitter
from .runtime.layout import CACHE_PAIRS, MAX_PINNED, SCRATCH, Z_REG, FrameLayout

BASELINE_SLOTS = (24, 22, 20, 16, 14, 12, 10, 8, 6, 4, 2)


class CacheError(RuntimeError):
    """Internal invariant violation in a stack manager (a compiler bug)."""


class StackManager:
    """Interface and shared bookkeeping."""

    tags_enabled = False
    pinning_enabled = False
    prefers_top_dest = False

    def __init__(self, em: Emitter, layout: Optional[FrameLayout] = None):
        self.em = em
        self.layout = layout
        self.spilled = 0

    # overridden ------------------------------------------------------------
    def begin_instruction(self) -> None: ...
    def getfree(self, hint: Optional[int] = None) -> int: raise NotImplementedError
    def push(self, pair: int, tag: Optional[ValueTag] = None) -> None: raise NotImplementedError
    def pop(self, hint: Optional[int] = None) -> int: raise NotImplementedError
    def claim(self, pair: int) -> int: return pair
    def drop(self) -> None: raise NotImplementedError
    def flush(self) -> None: ...
    def clear_tags(self) -> None: ...
    def invalidate(self, tag: ValueTag) -> None: ...
    def invalidate_statics(self) -> None: ...
    def writable(self, pair: int) -> bool: return True
    def is_pinned(self, pair: int) -> bool: return False
    def retag(self, pair: int, tag: Optional[ValueTag]) -> None: ...
    def reuse(self, tag: Optional[ValueTag]) -> bool: return False
    def can_skip(self, instr) -> bool: return False
    def pinned_pair(self, tag: ValueTag) -> Optional[int]: return None
    def pinned_pairs(self) -> dict: return {}

    @property
    def cached(self) -> int:
        return 0

    @property
    def depth(self) -> int:
        return self.cached + self.spilled

    def set_depth(self, depth: int) -> None:
        if self.cached:
            raise CacheError("set_depth with cached elements")
        self.spilled = depth

    def pop_destructive(self, hint: Optional[int] = None) -> int:
        return self.claim(self.pop(hint))

    def pop_tostore(self, tag: Optional[ValueTag], hint: Optional[int] = None) -> int:
        return self.pop(hint)

    def dump(self) -> str:
        return ""


class BaselineStack(StackManager):
    """Every element lives on the native stack; registers are per-instruction temporaries."""

    def __init__(self, em: Emitter, layout: Optional[FrameLayout] = None):
        super().__init__(em, layout)
        self.in_use: set = set()

    def begin_instruction(self) -> None:
        self.in_use = set()

    def getfree(self, hint: Optional[int] = None) -> int:
        if hint is not None and BASELINE_SLOTS[hint] not in self.in_use:
            pair = BASELINE_SLOTS[hint]
        else:
            free = [p for p in BASELINE_SLOTS if p not in self.in_use]
            if not free:
                raise CacheError("baseline ran out of temporaries")
            pair = free[0]
        self.in_use.add(pair)
        return pair

    def push(self, pair: int, tag: Optional[ValueTag] = None) -> None:
        self.em.pushw(pair)
        self.in_use.discard(pair)
        self.spilled += 1

    def pop(self, hint: Optional[int] = None) -> int:
        if self.spilled <= 0:
            raise CacheError("operand stack underflow")
        pair = self.getfree(hint)
        self.em.popw(pair)
        self.spilled -= 1
        return pair

    def drop(self) -> None:
        if self.spilled <= 0:
            raise CacheError("operand stack underflow")
        self.em.r(N.POP, SCRATCH)
        self.em.r(N.POP, SCRATCH)
        self.spilled -= 1


@dataclass
class _Pin:
    var: LoopVar
    pairs: tuple          # low half first
    loaded: bool
    dirty: bool = False


class CacheManager(StackManager):
    """Stack cache over the 11 cacheable pairs.

    ``tags`` enables popped value caching; ``pinning`` enables mark loops.
    """

    prefers_top_dest = True

    def __init__(self, em: Emitter, layout: Optional[FrameLayout] = None,
                 tags: bool = False, pinning: bool = False, pin_cap: int = MAX_PINNED):
        super().__init__(em, layout)
        self.tags_enabled = tags
        self.pinning_enabled = pinning
        self.pin_cap = max(0, min(pin_cap, MAX_PINNED))
        self.stack: list = []                       # pairs, bottom to top
        self.tag: dict = {p: None for p in CACHE_PAIRS}
        self.age: dict = {p: 0 for p in CACHE_PAIRS}
        self.pin_of: dict = {}                       # pair -> _Pin
        self.pins: list = []
        self.locked: set = set()
        self.clock = 0

    # basic state -------------------------------------------------------------
    @property
    def cached(self) -> int:
        return len(self.stack)

    def begin_instruction(self) -> None:
        self.locked = set()

    def _touch(self, pair: int) -> None:
        self.clock += 1
        self.age[pair] = self.clock

    def writable(self, pair: int) -> bool:
        return pair not in self.pin_of and pair not in self.stack

    def is_pinned(self, pair: int) -> bool:
        return pair in self.pin_of

    def pinned_pair(self, tag: ValueTag) -> Optional[int]:
        for p, pin in self.pin_of.items():
            if self.tag[p] == tag:
                return p
        return None

    def pinned_pairs(self) -> dict:
        """pair -> (frame offset, LoopVar) for every pinned pair."""
        out = {}
        for pin in self.pins:
            for k, p in enumerate(pin.pairs):
                out[p] = (self.layout.int_slot(pin.var.slot + k), pin.var)
        return out

    def _spill_bottom(self) -> None:
        if not self.stack:
            raise CacheError("no register pair available (all pinned or locked)")
        pair = self.stack.pop(0)
        self.em.pushw(pair)
        self.spilled += 1

    def getfree(self, hint: Optional[int] = None) -> int:
        while True:
            onstack = set(self.stack)
            free = [p for p in reversed(CACHE_PAIRS)
                    if p not in onstack and p not in self.pin_of and p not in self.locked]
            if free:
                break
            self._spill_bottom()
        untagged = [p for p in free if self.tag[p] is None]
        pair = untagged[0] if untagged else min(free, key=lambda p: (self.age[p], p))
        self.tag[pair] = None
        self.locked.add(pair)
        return pair

    def push(self, pair: int, tag: Optional[ValueTag] = None) -> None:
        self.stack.append(pair)
        self._touch(pair)
        if pair in self.pin_of:
            return
        if tag is not None and self.tags_enabled:
            self.invalidate(tag)
            self.tag[pair] = tag

    def pop(self, hint: Optional[int] = None) -> int:
        if self.stack:
            pair = self.stack.pop()
        else:
            if self.spilled <= 0:
                raise CacheError("operand stack underflow")
            pair = self.getfree()
            self.em.popw(pair)
            self.spilled -= 1
        self.locked.add(pair)
        self._touch(pair)
        return pair

    def claim(self, pair: int) -> int:
        """Make ``pair`` safe to overwrite; pinned registers are copied first."""
        if pair in self.pin_of or pair in self.stack:
            copy = self.getfree()
            self.em.movw(copy, pair)
            return copy
        self.tag[pair] = None
        return pair

    def pop_tostore(self, tag: Optional[ValueTag], hint: Optional[int] = None) -> int:
        pair = self.pop()
        self.retag(pair, tag)
        return pair

    def retag(self, pair: int, tag: Optional[ValueTag]) -> None:
        if tag is None:
            return
        self.invalidate(tag)
        if self.tags_enabled and pair not in self.pin_of and pair not in self.stack:
            self.tag[pair] = tag

    def drop(self) -> None:
        if self.stack:
            self.stack.pop()
            return
        if self.spilled <= 0:
            raise CacheError("operand stack underflow")
        self.em.r(N.POP, SCRATCH)
        self.em.r(N.POP, SCRATCH)
        self.spilled -= 1

    def flush(self) -> None:
        for pair in self.stack:
            self.em.pushw(pair)
        self.spilled += len(self.stack)
        self.stack = []

    def clear_tags(self) -> None:
        for p in CACHE_PAIRS:
            if p not in self.pin_of:
                self.tag[p] = None

    def invalidate(self, tag: ValueTag) -> None:
        for p in CACHE_PAIRS:
            if p not in self.pin_of and self.tag[p] == tag:
                self.tag[p] = None

    def invalidate_statics(self) -> None:
        for p in CACHE_PAIRS:
            t = self.tag[p]
            if p not in self.pin_of and t is not None and t.tag_type is TagType.STATIC:
                self.tag[p] = None

    # popped value caching ----------------------------------------------------
    def _holder(self, tag: ValueTag) -> Optional[int]:
        for p in CACHE_PAIRS:
            if self.tag[p] == tag:
                return p
        return None

    def available(self, tag: Optional[ValueTag]) -> bool:
        if tag is None:
            return False
        p = self._holder(tag)
        if p is None:
            return False
        return p in self.pin_of or self.tags_enabled

    def reuse(self, tag: Optional[ValueTag]) -> bool:
        """Push a register already holding ``tag``; False if none does."""
        if not self.available(tag):
            return False
        p = self._holder(tag)
        if p in self.pin_of:
            self.stack.append(p)
            self._touch(p)
        elif p in self.stack or p in self.locked:
            copy = self.getfree()
            self.em.movw(copy, p)
            self.stack.append(copy)
            self._touch(copy)
        else:
            self.stack.append(p)
            self._touch(p)
        return True

    def relocate_views(self, pair: int) -> None:
        """Give stack elements that alias pinned ``pair`` their own register."""
        for i, p in enumerate(self.stack):
            if p == pair:
                copy = self.getfree()
                self.em.movw(copy, pair)
                self.stack[i] = copy

    def can_skip(self, instr) -> bool:
        use = instr.op.info.tag_use
        if use is None:
            return False
        tags = instr_tags(instr)
        if use is TagUse.LOAD:
            if not tags or not all(self.available(t) for t in tags):
                return False
            for t in reversed(tags):          # high half is pushed first
                self.reuse(t)
            return True
        if not self.pin_of or not tags or instr.op not in (Op.SSTORE, Op.ISTORE, Op.SINC, Op.IINC):
            return False
        pairs = [self.pinned_pair(t) for t in tags]
        if any(p is None for p in pairs):
            return False
        pin = self.pin_of[pairs[0]]
        if use is TagUse.STORE:
            sources = [self.pop() for _ in pairs]       # low half on top
            for p in pairs:
                self.relocate_views(p)
            moves = [(dst, src) for dst, src in zip(pairs, sources) if dst != src]
            parallel_move(self.em, moves)
        else:
            for p in pairs:
                self.relocate_views(p)
            add_immediate(self.em, list(pairs), instr.args[1])
        pin.dirty = True
        return True

    # mark loops --------------------------------------------------------------
    def pin(self, mark: MarkLoop) -> None:
        if self.pins:
            raise CacheError("nested MARKLOOP block")
        self.flush()
        live = set(mark.live)
        free = [p for p in CACHE_PAIRS if p not in self.locked]
        used = 0
        for var in mark.variables:
            need = 2 if var.datatype is DataType.INT else 1
            if used + need > self.pin_cap or len(free) < need:
                continue
            pairs = tuple(free[:need])
            free = free[need:]
            used += need
            loaded = var.name in live
            pin = _Pin(var, pairs, loaded)
            for k, (p, t) in enumerate(zip(pairs, var.tags)):
                self.invalidate(t)
                self.tag[p] = t
                self.pin_of[p] = pin
                if loaded:
                    self.em.ldd16(p, "Y", self.layout.int_slot(var.slot + k))
            self.pins.append(pin)

    def unpin(self, mark: MarkLoop) -> None:
        self.flush()
        live = set(mark.live)
        for pin in self.pins:
            store = pin.dirty and pin.var.name in live
            for k, p in enumerate(pin.pairs):
                if store:
                    self.em.std16("Y", self.layout.int_slot(pin.var.slot + k), p)
                keep = store or (pin.loaded and not pin.dirty)
                del self.pin_of[p]
                if not keep:
                    self.tag[p] = None
        self.pins = []

    # diagnostics -------------------------------------------------------------
    def state(self) -> dict:
        """pair -> (stack position label or '', tag text or '', pinned flag)."""
        out = {}
        n = len(self.stack)
        for p in CACHE_PAIRS:
            positions = [f"Int{n - i}" for i, q in enumerate(self.stack) if q == p]
            tag = self.tag[p]
            pinned = p in self.pin_of
            if positions or tag is not None or pinned:
                out[p] = ("/".join(positions), str(tag) if tag else "", pinned)
        return out

    def dump(self) -> str:
        cells = []
        for p, (pos, tag, pinned) in sorted(self.state().items(), reverse=True):
            text = " ".join(x for x in (pos, tag, "PIN" if pinned else "") if x)
            cells.append(f"r{p}:{text}")
        extra = f" spilled={self.spilled}" if self.spilled else ""
        return (" ".join(cells) or "-") + extra


# small emission utilities shared with the code generator ------------------------

def parallel_move(em: Emitter, moves: list) -> None:
    """Emit MOVWs performing all ``(dst, src)`` pair moves simultaneously."""
    moves = [(d, s) for d, s in moves if d != s]
    while moves:
        sources = {s for _, s in moves}
        ready = [m for m in moves if m[0] not in sources]
        if ready:
            d, s = ready[0]
            em.movw(d, s)
            moves.remove(ready[0])
            continue
        # a cycle: park one source in the scratch pair
        d, s = moves[0]
        em.movw(SCRATCH, s)
        moves = [(dd, SCRATCH if ss == s else ss) for dd, ss in moves]


def add_immediate(em: Emitter, pairs: list, delta: int) -> None:
    """Add a signed constant to a 16-bit (one pair) or 32-bit (two pairs) register value."""
    if len(pairs) == 1 and 0 < delta <= 63:
        em.op(N.ADIW, rd=pairs[0], imm=delta)
        return
    if len(pairs) == 1 and -63 <= delta < 0:
        em.op(N.SBIW, rd=pairs[0], imm=-delta)
        return
    if delta == 0:
        return
    regs = [r for p in pairs for r in (p, p + 1)]
    value = delta & ((1 << (8 * len(regs))) - 1)
    for i, r in enumerate(regs):
        if i % 2 == 0:
            em.ldi(Z_REG, value >> (8 * i))
            em.ldi(Z_REG + 1, value >> (8 * (i + 1)))
        em.rr(N.ADD if i == 0 else N.ADC, r, Z_REG + (i % 2))
