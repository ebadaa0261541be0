"""Structural verification: stack typing, join consistency, max depths."""

from __future__ import annotations

from dataclasses import dataclass, field

from .model import SLOTS, Infusion, MethodDef, stack_effect
from .opcodes import Op, Operand


class VerifyError(ValueError):
    def __init__(self, message: str, method: str = "", index: int = -1):
        where = f"{method}[{index}]: " if method else ""
        super().__init__(where + message)
        self.method = method
        self.index = index


@dataclass
class MethodReport:
    name: str
    # stack state before each instruction: (int value types, ref depth), or
    # None for unreachable instructions
    states: list = field(default_factory=list)
    max_int_stack: int = 0
    max_ref_stack: int = 0

    def int_depth(self, index: int) -> int:
        st = self.states[index]
        return sum(SLOTS[t] for t in st[0]) if st else 0


@dataclass
class VerificationReport:
    methods: dict = field(default_factory=dict)

    def __getitem__(self, name: str) -> MethodReport:
        return self.methods[name]


def _check_operands(inf: Infusion, m: MethodDef, i: int, instr) -> None:
    op = instr.op
    kinds = op.info.operands
    name = m.name
    if op in (Op.SLOAD, Op.SSTORE) and instr.args[0] >= m.local_int_slots:
        raise VerifyError(f"local slot {instr.args[0]} out of range", name, i)
    if op in (Op.ILOAD, Op.ISTORE) and instr.args[0] + 1 >= m.local_int_slots:
        raise VerifyError(f"int local at slot {instr.args[0]} out of range", name, i)
    if op in (Op.SINC,) and instr.args[0] >= m.local_int_slots:
        raise VerifyError(f"local slot {instr.args[0]} out of range", name, i)
    if op in (Op.IINC,) and instr.args[0] + 1 >= m.local_int_slots:
        raise VerifyError(f"int local at slot {instr.args[0]} out of range", name, i)
    if op in (Op.ALOAD, Op.ASTORE) and instr.args[0] >= m.local_ref_slots:
        raise VerifyError(f"ref local {instr.args[0]} out of range", name, i)
    if op in (Op.GETSTATIC_S, Op.PUTSTATIC_S) and instr.args[0] >= inf.static_int_slots:
        raise VerifyError(f"static slot {instr.args[0]} out of range", name, i)
    if op in (Op.GETSTATIC_I, Op.PUTSTATIC_I) and instr.args[0] + 1 >= inf.static_int_slots:
        raise VerifyError(f"static int at slot {instr.args[0]} out of range", name, i)
    if op in (Op.GETSTATIC_A, Op.PUTSTATIC_A) and instr.args[0] >= inf.static_ref_slots:
        raise VerifyError(f"static ref {instr.args[0]} out of range", name, i)
    if kinds and kinds[0] in (Operand.FIELD, Operand.CLASS):
        try:
            cls = instr.args[0]
            if kinds[0] is Operand.FIELD:
                k = instr.args[1]
                if op.name.endswith(("_A", "_A_FIXED")):
                    limit = inf.instance_ref_fields(cls)
                elif op.name.endswith("_I"):
                    limit = inf.instance_int_slots(cls) - 1
                else:
                    limit = inf.instance_int_slots(cls)
                if not 0 <= k < limit:
                    raise VerifyError(f"field {k} out of range for class {cls}", name, i)
            else:
                inf.class_def(cls)
        except KeyError as exc:
            raise VerifyError(str(exc.args[0]), name, i) from None
    if op in (Op.INVOKESTATIC, Op.INVOKELIGHT):
        try:
            callee = inf.method(instr.args[0])
        except KeyError:
            raise VerifyError(f"call to undefined method {instr.args[0]!r}", name, i) from None
        if op is Op.INVOKELIGHT and not callee.lightweight:
            raise VerifyError(f"INVOKELIGHT of normal method {callee.name!r}", name, i)
    if m.lightweight and op in (Op.NEW, Op.NEWARRAY):
        raise VerifyError("allocation inside a lightweight method", name, i)


def verify_method(inf: Infusion, m: MethodDef) -> MethodReport:
    body = m.body
    name = m.name
    targets = {}
    for i, instr in enumerate(body):
        if instr.op is Op.BRTARGET:
            if instr.args[0] in targets:
                raise VerifyError(f"duplicate branch target id {instr.args[0]}", name, i)
            targets[instr.args[0]] = i
        _check_operands(inf, m, i, instr)
    lw_params = 0
    for instr in body:
        if instr.op is not Op.LW_PARAMETER:
            break
        lw_params += 1
    if any(x.op is Op.LW_PARAMETER for x in body[lw_params:]):
        raise VerifyError("LW_PARAMETER after the method prologue", name)
    if lw_params:
        if not m.lightweight:
            raise VerifyError("LW_PARAMETER in a normal method", name)
        types = "".join(x.args[0] for x in body[:lw_params])
        if types != m.params:
            raise VerifyError(f"LW_PARAMETER types {types!r} do not match parameters {m.params!r}", name)
    # a lightweight method without the prologue is in source form: its
    # parameters arrive in locals until the infuser converts it
    in_locals = not lw_params
    if in_locals and m.param_slots > m.local_int_slots:
        raise VerifyError("parameters exceed local int slots", name)
    if in_locals and m.param_refs > m.local_ref_slots:
        raise VerifyError("parameters exceed local ref slots", name)

    states: list = [None] * len(body)
    work = []

    def merge(index: int, state, src: int):
        if index >= len(body):
            raise VerifyError("control falls off the end of the method", name, src)
        old = states[index]
        if old is None:
            states[index] = state
            work.append(index)
        elif old != state:
            raise VerifyError(f"inconsistent stack at join: {old} vs {state}", name, index)

    if body:
        merge(0, ((), 0), 0)
    else:
        raise VerifyError("empty method body", name)
    max_int = max_ref = 0
    while work:
        i = work.pop()
        ints, refs = states[i]
        instr = body[i]
        ins, outs = stack_effect(instr, inf)
        stack = list(ints)
        for t in reversed(ins):
            if t == "A":
                if refs == 0:
                    raise VerifyError("reference stack underflow", name, i)
                refs -= 1
            else:
                if not stack:
                    raise VerifyError("stack underflow", name, i)
                top = stack.pop()
                if top != t:
                    raise VerifyError(f"type mismatch: expected {t}, found {top}", name, i)
        if instr.op.info.terminator and instr.op is not Op.GOTO:
            ret = {"SRETURN": "S", "IRETURN": "I", "ARETURN": "A", "RETURN": "V"}[instr.op.name]
            if ret != m.returns:
                raise VerifyError(f"{instr.op.name} in method returning {m.returns}", name, i)
            continue
        for t in outs:
            if t == "A":
                refs += 1
            else:
                stack.append(t)
        depth = sum(SLOTS[t] for t in stack)
        max_int = max(max_int, depth)
        max_ref = max(max_ref, refs)
        new = (tuple(stack), refs)
        if instr.op.info.branch:
            label = instr.args[0]
            if label not in targets:
                raise VerifyError(f"branch to undefined target {label}", name, i)
            merge(targets[label], new, i)
        if not instr.op.info.terminator:
            merge(i + 1, new, i)
    report = MethodReport(name, states, max_int, max_ref)
    return report


def verify(inf: Infusion) -> VerificationReport:
    """Verify every method and record max stack depths on the methods."""
    report = VerificationReport()
    if inf.methods and not 0 <= inf.entry < len(inf.methods):
        raise VerifyError(f"entry index {inf.entry} out of range")
    for m in inf.methods:
        r = verify_method(inf, m)
        m.max_int_stack = r.max_int_stack
        m.max_ref_stack = r.max_ref_stack
        report.methods[m.name] = r
    return report
