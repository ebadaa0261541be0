"""Branch-size resolution and tag patching.

Branch tags are emitted as 3-word placeholders.  Once every label address
is known the resolver repeatedly lays the code out, shrinking each tag to
the smallest form that reaches its target:

* conditional: ``BRcc k`` (1 word), ``BR!cc +1; RJMP k`` (2), ``BR!cc +2; JMP t`` (3)
* unconditional: ``RJMP k`` (1), ``JMP t`` (2)

Tags only ever shrink, and shrinking can only shorten other branches, so
the iteration converges.
"""

from __future__ import annotations

from ..isa import BranchTag, NativeInstruction, NativeOpcode, UnresolvedBranchError, word_size
from .emit import Item, Label

N = NativeOpcode
MAX_ROUNDS = 64


def _fits_br(k: int) -> bool:
    return -64 <= k <= 63


def _fits_rjmp(k: int) -> bool:
    return -2048 <= k <= 2047


def _layout(items: list, sizes: dict, base: int):
    addrs = []
    labels = {}
    a = base
    for i, it in enumerate(items):
        addrs.append(a)
        if isinstance(it.instr, Label):
            labels[it.instr.id] = a
        elif isinstance(it.instr, BranchTag):
            a += sizes[i]
        else:
            a += word_size(it.instr)
    return addrs, labels, a


def _best_size(tag: BranchTag, at: int, target: int) -> int:
    if tag.cond is None:
        return 1 if _fits_rjmp(target - (at + 1)) else 2
    if _fits_br(target - (at + 1)):
        return 1
    return 2 if _fits_rjmp(target - (at + 2)) else 3


def resolve_branches(items: list, base: int = 0):
    """Return ``(items, labels)`` with every BranchTag replaced and labels removed.

    ``labels`` maps branch-target id to absolute word address.
    """
    sizes = {i: 3 for i, it in enumerate(items) if isinstance(it.instr, BranchTag)}
    for _ in range(MAX_ROUNDS):
        addrs, labels, _end = _layout(items, sizes, base)
        changed = False
        for i in sizes:
            tag = items[i].instr
            if tag.label not in labels:
                raise UnresolvedBranchError(f"branch to unknown target L{tag.label}")
            best = _best_size(tag, addrs[i], labels[tag.label])
            if best < sizes[i]:
                sizes[i] = best
                changed = True
        if not changed:
            break
    else:
        raise RuntimeError("branch resolution did not converge")
    out = []
    for i, it in enumerate(items):
        ins = it.instr
        if isinstance(ins, Label):
            continue
        if not isinstance(ins, BranchTag):
            out.append(it)
            continue
        at, target, size = addrs[i], labels[ins.label], sizes[i]
        if ins.cond is None:
            if size == 1:
                new = [NativeInstruction(N.RJMP, imm=target - (at + 1))]
            else:
                new = [NativeInstruction(N.JMP, target=target)]
        elif size == 1:
            new = [NativeInstruction(N.BR_COND, cond=ins.cond, imm=target - (at + 1))]
        elif size == 2:
            new = [NativeInstruction(N.BR_COND, cond=ins.cond.inverted(), imm=1),
                   NativeInstruction(N.RJMP, imm=target - (at + 2))]
        else:
            new = [NativeInstruction(N.BR_COND, cond=ins.cond.inverted(), imm=2),
                   NativeInstruction(N.JMP, target=target)]
        out.extend(Item(n, it.bc) for n in new)
    return out, labels
