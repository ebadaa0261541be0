"""Host-side bytecode transformations.

Every pass maps bytecode to bytecode and never looks at the target
instruction set.  The :func:`infuse` pipeline runs them in a fixed order
with each optional pass independently switchable for ablation runs.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

from .bytecode.model import (DataType, Infusion, Instr, LoopVar, MarkLoop, MethodDef,
                             local_slot_effect, loop_var_of, stack_effect)
from .bytecode.opcodes import ARRAY_LOADS, ARRAY_STORES, SHIFT_CONST, Op
from .bytecode.verify import verify, verify_method

log = logging.getLogger(__name__)

S_SHIFTS = ("SSHL", "SSHR", "SUSHR")
I_SHIFTS = ("ISHL", "ISHR", "IUSHR")
SHORT_CONSTS = (Op.SCONST, Op.BIPUSH, Op.SIPUSH)


class InfuserError(ValueError):
    pass


class RecursionCycleError(InfuserError):
    def __init__(self, cycle: list):
        super().__init__("recursion through lightweight methods: " + " -> ".join(cycle))
        self.cycle = cycle


@dataclass(frozen=True)
class LoopInfo:
    """An accepted inner loop: instruction range and its variables."""

    start: int
    end: int
    variables: tuple            # LoopVar sorted by descending frequency
    live_at_entry: frozenset
    live_at_exit: frozenset


# ---------------------------------------------------------------------------
# branch targets

def insert_branch_targets(method: MethodDef) -> MethodDef:
    """Replace label marks by dense BRTARGET ids and retarget branches.

    Bodies may contain ``LabelMark`` items and branches whose operand is a
    label name.  Only labels that some branch references produce a
    BRTARGET; labels sharing a position share one id.
    """
    from .bytecode.assembly import LabelMark

    body = method.body
    if not any(isinstance(x, LabelMark) for x in body) and not any(
            x.op.info.branch and isinstance(x.args[0], str) for x in body):
        return method
    next_id = sum(1 for x in body if isinstance(x, Instr) and x.op is Op.BRTARGET)
    targeted = {x.args[0] for x in body
                if isinstance(x, Instr) and x.op.info.branch and isinstance(x.args[0], str)}
    ids = {}
    out = []
    pending = []
    for item in body + [None]:
        if isinstance(item, LabelMark):
            pending.append(item.name)
            continue
        if pending and any(p in targeted for p in pending):
            for p in pending:
                ids[p] = next_id
            out.append(Instr(Op.BRTARGET, (next_id,)))
            next_id += 1
        pending = []
        if item is not None:
            out.append(item)
    final = []
    for x in out:
        if x.op.info.branch and isinstance(x.args[0], str):
            if x.args[0] not in ids:
                raise KeyError(x.args[0])
            x = Instr(x.op, (ids[x.args[0]],))
        final.append(x)
    return method.copy(body=final)


# ---------------------------------------------------------------------------
# instruction-set folds

def fold_constant_shifts(method: MethodDef) -> MethodDef:
    """Fold ``const k; shift`` pairs into ``shift_CONST(k)``."""
    body = method.body
    out = []
    i = 0
    while i < len(body):
        a = body[i]
        b = body[i + 1] if i + 1 < len(body) else None
        if b is not None:
            if a.op in SHORT_CONSTS and b.op.name in S_SHIFTS and 0 <= a.args[0] <= 15:
                out.append(Instr(Op[SHIFT_CONST[b.op.name]], (a.args[0],)))
                i += 2
                continue
            if a.op is Op.ICONST and b.op.name in I_SHIFTS and 0 <= a.args[0] <= 31:
                out.append(Instr(Op[SHIFT_CONST[b.op.name]], (a.args[0],)))
                i += 2
                continue
        out.append(a)
        i += 1
    return method.copy(body=out)


def _symbolic_walk(method: MethodDef, inf: Infusion, visit):
    """Walk the body linearly with a symbolic stack of (type, origin, epoch).

    ``origin`` is the index of the instruction that produced the value.  The
    epoch advances at every branch and branch target, so two values with the
    current epoch were both produced on the straight-line path leading here.
    At branch targets the stack is rebuilt from the verifier's typing.
    ``visit(i, instr, popped, epoch)`` sees the popped entries (bottom first).
    """
    report = verify_method(inf, method)
    stack = []
    epoch = 0
    dead = False
    for i, instr in enumerate(method.body):
        if instr.op is Op.BRTARGET or dead:
            epoch += 1
            st = report.states[i]
            if st is None:
                dead = True
                continue
            ints, refs = st
            stack = [(t, None, epoch) for t in ints] + [("A", None, epoch)] * refs
            dead = False
        ins, outs = stack_effect(instr, inf)
        popped = []
        for t in reversed(ins):
            # refs and ints live on separate stacks; search from the top
            for k in range(len(stack) - 1, -1, -1):
                if (stack[k][0] == "A") == (t == "A"):
                    popped.append(stack.pop(k))
                    break
        popped.reverse()
        visit(i, instr, popped, epoch)
        for t in outs:
            stack.append((t, i, epoch))
        if instr.op.info.branch:
            epoch += 1
        if instr.op.info.terminator:
            dead = True


def fold_simul(method: MethodDef, inf: Infusion) -> MethodDef:
    """Replace ``S2I ... S2I IMUL`` on short-origin operands by SIMUL."""
    body = method.body
    remove = set()
    replace_at = {}

    def visit(i, instr, popped, epoch):
        if instr.op is not Op.IMUL:
            return
        a, b = popped
        srcs = [a[1], b[1]]
        if any(s is None for s in srcs) or a[2] != epoch or b[2] != epoch:
            return
        if all(body[s].op is Op.S2I and s not in remove for s in srcs):
            remove.update(srcs)
            replace_at[i] = Instr(Op.SIMUL)

    _symbolic_walk(method, inf, visit)
    if not replace_at:
        return method
    out = [replace_at.get(i, x) for i, x in enumerate(body) if i not in remove]
    return method.copy(body=out)


def narrow_array_indexes(method: MethodDef, inf: Infusion) -> MethodDef:
    """Make array instructions take a 16-bit index.

    An S2I feeding the index is removed; otherwise an I2S is inserted after
    the index producer (or directly before a load, where the index is on
    top).  Indexes whose producer is not known are left 32-bit.
    """
    body = method.body
    remove = set()
    after = {}
    before = {}
    replace_at = {}

    def visit(i, instr, popped, epoch):
        name = instr.op.name
        if name not in ARRAY_LOADS and name not in ARRAY_STORES:
            return
        if instr.args[0] != 32:
            return
        idx = popped[1]
        src = idx[1]
        if src is not None and idx[2] == epoch and body[src].op is Op.S2I and src not in remove:
            remove.add(src)
        elif name in ARRAY_LOADS:
            before.setdefault(i, []).append(Instr(Op.I2S))
        elif src is not None and idx[2] == epoch:
            after.setdefault(src, []).append(Instr(Op.I2S))
        else:
            return
        replace_at[i] = Instr(instr.op, (16,))

    _symbolic_walk(method, inf, visit)
    if not replace_at:
        return method
    out = []
    for i, x in enumerate(body):
        out.extend(before.get(i, []))
        if i not in remove:
            out.append(replace_at.get(i, x))
        out.extend(after.get(i, []))
    return method.copy(body=out)


def fix_ref_fields(method: MethodDef, inf: Infusion) -> MethodDef:
    """Use fixed-offset reference field access for classes nobody extends."""
    subclassed = {c.parent for c in inf.classes if c.parent}
    out = []
    changed = False
    for x in method.body:
        if x.op in (Op.GETFIELD_A, Op.PUTFIELD_A):
            cls = inf.class_def(x.args[0])
            if cls.final or cls.name not in subclassed:
                x = Instr(Op.GETFIELD_A_FIXED if x.op is Op.GETFIELD_A else Op.PUTFIELD_A_FIXED, x.args)
                changed = True
        out.append(x)
    return method.copy(body=out) if changed else method


# ---------------------------------------------------------------------------
# mark loops

def _successors(body: list, i: int, targets: dict) -> list:
    instr = body[i]
    out = []
    if instr.op.info.branch:
        out.append(targets[instr.args[0]])
    if not instr.op.info.terminator and i + 1 < len(body):
        out.append(i + 1)
    return out


def live_slots(method: MethodDef) -> list:
    """Backward may-live analysis over int local slots; live-in per instruction."""
    body = method.body
    targets = {x.args[0]: i for i, x in enumerate(body) if x.op is Op.BRTARGET}
    n = len(body)
    uses, defs = zip(*(local_slot_effect(x) for x in body)) if body else ((), ())
    succ = [_successors(body, i, targets) for i in range(n)]
    live_in = [frozenset()] * n
    changed = True
    while changed:
        changed = False
        for i in range(n - 1, -1, -1):
            out = set()
            for s in succ[i]:
                out |= live_in[s]
            new = frozenset(uses[i] | (out - defs[i]))
            if new != live_in[i]:
                live_in[i] = new
                changed = True
    return live_in


def find_inner_loops(method: MethodDef, conservative: bool = False) -> list:
    """Innermost single-entry single-exit loops, as LoopInfo records."""
    body = method.body
    targets = {x.args[0]: i for i, x in enumerate(body) if x.op is Op.BRTARGET}
    branches = [(i, targets[x.args[0]]) for i, x in enumerate(body) if x.op.info.branch]
    live = None
    loops = []
    for b, h in branches:
        if h > b:
            continue
        start = h
        prev = body[h - 1] if h > 0 else None
        if prev is not None and prev.op is Op.GOTO and h < targets[prev.args[0]] <= b:
            start = h - 1
        region = range(start, b + 1)
        reason = None
        for i, t in branches:
            inside = start <= i <= b
            if inside and i != b and t <= i:
                reason = "contains an inner loop"
            elif inside and not start <= t <= b:
                reason = "branch leaves the loop"
            elif not inside and start <= t <= b:
                reason = "branch enters the loop"
            if reason:
                break
        if reason is None:
            for i in region:
                op = body[i].op
                if op.info.terminator and op is not Op.GOTO:
                    reason = "return inside the loop"
                elif op is Op.MARKLOOP:
                    reason = "already marked"
                if reason:
                    break
        if reason:
            log.info("%s: loop at %d..%d not marked (%s)", method.name, start, b, reason)
            continue
        counts = {}
        shapes = {}
        for i in region:
            v = loop_var_of(body[i])
            if v is None:
                continue
            key = (v.datatype, v.slot)
            counts[key] = counts.get(key, 0) + 1
            for s in range(v.slot, v.slot + (2 if v.datatype is DataType.INT else 1)):
                shapes.setdefault(s, set()).add(key)
        clash = {k for keys in shapes.values() if len(keys) > 1 for k in keys}
        variables = sorted((LoopVar(d, s, c) for (d, s), c in counts.items() if (d, s) not in clash),
                           key=lambda v: (-v.frequency, v.slot))
        if not variables:
            continue
        if live is None:
            live = live_slots(method)

        def is_live(v: LoopVar, at: int) -> bool:
            if conservative:
                return True
            if at >= len(body):
                return False
            width = 2 if v.datatype is DataType.INT else 1
            return any(s in live[at] for s in range(v.slot, v.slot + width))

        loops.append(LoopInfo(start, b, tuple(variables),
                              frozenset(v.name for v in variables if is_live(v, start)),
                              frozenset(v.name for v in variables if is_live(v, b + 1))))
    return loops


def detect_mark_loops(method: MethodDef, inf: Optional[Infusion] = None,
                      conservative: bool = False) -> MethodDef:
    """Bracket accepted inner loops with MARKLOOP begin/end markers."""
    loops = find_inner_loops(method, conservative)
    if not loops:
        return method
    if inf is not None:
        report = verify_method(inf, method)
        ok = []
        for lp in loops:
            before = report.states[lp.start]
            after = report.states[lp.end + 1] if lp.end + 1 < len(method.body) else None
            if before is None or before != ((), 0) or (after is not None and after != ((), 0)):
                log.info("%s: loop at %d..%d not marked (stack not empty at boundary)",
                            method.name, lp.start, lp.end)
                continue
            ok.append(lp)
        loops = ok
    body = list(method.body)
    for lp in sorted(loops, key=lambda lp: lp.start, reverse=True):
        order = [v.name for v in lp.variables]
        begin = MarkLoop(True, lp.variables, tuple(n for n in order if n in lp.live_at_entry))
        end = MarkLoop(False, (), tuple(n for n in order if n in lp.live_at_exit))
        body.insert(lp.end + 1, Instr(Op.MARKLOOP, (end,)))
        body.insert(lp.start, Instr(Op.MARKLOOP, (begin,)))
    return method.copy(body=body)


# ---------------------------------------------------------------------------
# lightweight methods

def _param_stores(method: MethodDef) -> list:
    """STOREs that move parameters from the stack into locals, last param first."""
    stores = []
    slot = ref = 0
    for t in method.params:
        if t == "S":
            stores.append(Instr(Op.SSTORE, (slot,)))
            slot += 1
        elif t == "I":
            stores.append(Instr(Op.ISTORE, (slot,)))
            slot += 2
        else:
            stores.append(Instr(Op.ASTORE, (ref,)))
            ref += 1
    return stores[::-1]


def lightweight_cycle(inf: Infusion) -> Optional[list]:
    """Return a call cycle among lightweight methods, or None."""
    lw = {m.name: m for m in inf.methods if m.lightweight}
    edges = {n: [x.args[0] for x in m.body
                 if x.op in (Op.INVOKESTATIC, Op.INVOKELIGHT) and x.args[0] in lw]
             for n, m in lw.items()}
    state = {}
    path = []

    def dfs(n):
        state[n] = 1
        path.append(n)
        for c in edges[n]:
            if state.get(c) == 1:
                return path[path.index(c):] + [c]
            if c not in state:
                found = dfs(c)
                if found:
                    return found
        state[n] = 2
        path.pop()
        return None

    for n in edges:
        if n not in state:
            found = dfs(n)
            if found:
                return found
    return None


def convert_lightweight(method: MethodDef, inf: Optional[Infusion] = None) -> MethodDef:
    """Give a ``.lightweight`` method its LW_PARAMETER prologue.

    Handwritten bodies (already starting with LW_PARAMETER) are kept as is;
    others get one LW_PARAMETER per parameter followed by STOREs into the
    parameter locals.
    """
    if not method.lightweight:
        return method
    if inf is not None:
        cycle = lightweight_cycle(inf)
        if cycle and method.name in cycle:
            raise RecursionCycleError(cycle)
    for x in method.body:
        if x.op in (Op.INVOKESTATIC, Op.INVOKELIGHT) and x.args[0] == method.name:
            raise RecursionCycleError([method.name, method.name])
        if x.op in (Op.NEW, Op.NEWARRAY):
            raise InfuserError(f"lightweight method {method.name!r} allocates ({x.op.name})")
    if method.handwritten_lightweight:
        return method
    prologue = [Instr(Op.LW_PARAMETER, (t,)) for t in method.params] + _param_stores(method)
    return method.copy(body=prologue + list(method.body))


def _shift_locals(instr: Instr, ints: int, refs: int) -> Instr:
    op = instr.op
    if op in (Op.SLOAD, Op.ILOAD, Op.SSTORE, Op.ISTORE):
        return Instr(op, (instr.args[0] + ints,))
    if op in (Op.SINC, Op.IINC):
        return Instr(op, (instr.args[0] + ints, instr.args[1]))
    if op in (Op.ALOAD, Op.ASTORE):
        return Instr(op, (instr.args[0] + refs,))
    if op is Op.MARKLOOP:
        mark = instr.args[0]
        shift = lambda v: LoopVar(v.datatype, v.slot + ints, v.frequency)
        rename = lambda name: shift(LoopVar.parse(name)).name
        return Instr(op, (MarkLoop(mark.begin, tuple(shift(v) for v in mark.variables),
                                   tuple(rename(n) for n in mark.live)),))
    return instr


def unconvert_lightweight(method: MethodDef) -> MethodDef:
    """Turn a lightweight method back into a normal one."""
    if not method.lightweight:
        return method
    if not method.handwritten_lightweight:
        return method.copy(lightweight=False)
    n = sum(1 for x in method.body if x.op is Op.LW_PARAMETER)
    pslots, prefs = method.param_slots, method.param_refs
    loads = []
    slot = ref = 0
    for t in method.params:
        if t == "S":
            loads.append(Instr(Op.SLOAD, (slot,)))
            slot += 1
        elif t == "I":
            loads.append(Instr(Op.ILOAD, (slot,)))
            slot += 2
        else:
            loads.append(Instr(Op.ALOAD, (ref,)))
            ref += 1
    body = loads + [_shift_locals(x, pslots, prefs) for x in method.body[n:]]
    return method.copy(body=body, lightweight=False,
                       local_int_slots=method.local_int_slots + pslots,
                       local_ref_slots=method.local_ref_slots + prefs)


def _lw_callees(m: MethodDef, lw: dict) -> list:
    return [lw[x.args[0]] for x in m.body
            if x.op in (Op.INVOKESTATIC, Op.INVOKELIGHT) and x.args[0] in lw]


def rewrite_invokes_and_sort(inf: Infusion) -> Infusion:
    """Use INVOKELIGHT for lightweight callees, order callees first, size reserves.

    A lightweight method needs ``(1 if it calls anything) + its locals +
    the largest need among its lightweight callees`` slots of its caller's
    frame; each method reserves the largest need among its callees.
    """
    cycle = lightweight_cycle(inf)
    if cycle:
        raise RecursionCycleError(cycle)
    lw = {m.name: m for m in inf.methods if m.lightweight}
    methods = []
    for m in inf.methods:
        body = []
        for x in m.body:
            if x.op in (Op.INVOKESTATIC, Op.INVOKELIGHT):
                x = Instr(Op.INVOKELIGHT if x.args[0] in lw else Op.INVOKESTATIC, x.args)
            body.append(x)
        methods.append(m.copy(body=body))
    by_name = {m.name: m for m in methods}
    lw = {n: by_name[n] for n in lw}

    need, ref_need = {}, {}

    def visit(m):
        if m.name in need:
            return
        callees = _lw_callees(m, lw)
        for c in callees:
            visit(c)
        sub = max((need[c.name] for c in callees), default=0)
        sub_ref = max((ref_need[c.name] for c in callees), default=0)
        m.lw_frame_reserve = sub
        m.lw_ref_reserve = sub_ref
        if m.lightweight:
            own = m.local_int_slots + m.local_ref_slots
            need[m.name] = (1 if m.nested else 0) + own + sub
            ref_need[m.name] = m.max_ref_stack + sub_ref

    verify(Infusion(methods, inf.static_int_slots, inf.static_ref_slots, inf.classes, inf.entry))
    order = []
    seen = set()

    def topo(m):
        if m.name in seen:
            return
        seen.add(m.name)
        for c in _lw_callees(m, lw):
            topo(c)
        order.append(m)

    for m in methods:
        if m.lightweight:
            topo(m)
    for m in methods:
        visit(m)
    order += [m for m in methods if not m.lightweight]
    entry_name = inf.methods[inf.entry].name if inf.methods else None
    out = Infusion(order, inf.static_int_slots, inf.static_ref_slots, inf.classes, 0)
    if entry_name is not None:
        out.entry = out.method_index(entry_name)
    return out


# ---------------------------------------------------------------------------
# pipeline

@dataclass(frozen=True)
class InfuseOptions:
    constshift: bool = True
    simul: bool = True
    narrow_idx: bool = True
    markloop: bool = True
    lightweight: bool = True
    conservative_liveness: bool = False


def infuse(inf: Infusion, options: InfuseOptions = InfuseOptions()) -> Infusion:
    """Run the transformation pipeline and return a verified infusion."""
    work = inf.copy()
    if options.lightweight:
        cycle = lightweight_cycle(work)
        if cycle:
            raise RecursionCycleError(cycle)
        work.methods = [convert_lightweight(m) for m in work.methods]
    else:
        work.methods = [unconvert_lightweight(m) for m in work.methods]
    verify(work)
    for idx, m in enumerate(work.methods):
        m = fix_ref_fields(m, work)
        if options.constshift:
            m = fold_constant_shifts(m)
        work.methods[idx] = m
    for idx in range(len(work.methods)):
        if options.simul:
            work.methods[idx] = fold_simul(work.methods[idx], work)
        if options.narrow_idx:
            work.methods[idx] = narrow_array_indexes(work.methods[idx], work)
        if options.markloop:
            work.methods[idx] = detect_mark_loops(work.methods[idx], work,
                                                  options.conservative_liveness)
    out = rewrite_invokes_and_sort(work)
    verify(out)
    return out
