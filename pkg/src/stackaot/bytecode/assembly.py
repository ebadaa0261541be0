"""Textual bytecode assembly (``.sasm``): parser and printer.

Grammar, one item per line (``;`` starts a comment)::

    .entry main
    .statics ints=4 refs=1
    .class Node ints=2 refs=1 parent=Base final
    .method name (SIA)S          ; parameter types, return type (V = void)
    .lightweight
    .locals 3 1                  ; int slots, ref slots
    .reserve 2 0                 ; lightweight frame reserve (printed by tools)
    loop:                        ; label; targeted labels become BRTARGETs
        SLOAD_0                  ; or SLOAD 0
        IF_SCMPGT loop
        MARKLOOP BEGIN tags=LS0:3,LS1:1 in=LS0,LS1
        MARKLOOP END out=LS0
    .end
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from .model import ClassDef, Infusion, Instr, LoopVar, MarkLoop, MethodDef
from .opcodes import Op, Operand


class AsmError(ValueError):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        loc = f"line {line}, column {column}: " if line else ""
        super().__init__(loc + message)
        self.line = line
        self.column = column


@dataclass(frozen=True)
class LabelMark:
    """Label position in a method body before branch targets are inserted."""

    name: str
    line: int = 0


_DESC = re.compile(r"^\(([SIA]*)\)([SIAV])$")
_SUFFIX = re.compile(r"^(.*?)_(M?\d+)$")


def _int(text: str, line: int, col: int) -> int:
    try:
        return int(text, 0)
    except ValueError:
        raise AsmError(f"expected a number, got {text!r}", line, col) from None


def _parse_mark(args: list, line: int, col: int) -> MarkLoop:
    if not args:
        raise AsmError("MARKLOOP needs BEGIN or END", line, col)
    kind = args[0].upper()
    fields = {}
    for a in args[1:]:
        k, _, v = a.partition("=")
        fields[k.lower()] = [x for x in v.split(",") if x]
    try:
        if kind == "BEGIN":
            variables = []
            for item in fields.get("tags", []):
                name, _, freq = item.partition(":")
                variables.append(LoopVar.parse(name, int(freq or 0)))
            return MarkLoop(True, tuple(variables), tuple(fields.get("in", [])))
        if kind == "END":
            return MarkLoop(False, (), tuple(fields.get("out", [])))
    except ValueError as exc:
        raise AsmError(str(exc), line, col) from None
    raise AsmError(f"MARKLOOP expects BEGIN or END, got {args[0]!r}", line, col)


def parse_instruction(text: str, line: int = 0, col: int = 1) -> Instr:
    """Parse one instruction; branch operands are kept as label names."""
    parts = text.split()
    mnem = parts[0].upper()
    args = parts[1:]
    op = Op.__members__.get(mnem)
    if op is None:
        m = _SUFFIX.match(mnem)
        base = Op.__members__.get(m.group(1)) if m else None
        if base is None or base.info.operands not in ((Operand.LOCAL,), (Operand.VALUE,)):
            raise AsmError(f"unknown opcode {parts[0]!r}", line, col)
        suffix = m.group(2)
        args = [("-" + suffix[1:]) if suffix.startswith("M") else suffix] + args
        op = base
    kinds = op.info.operands
    if op is Op.MARKLOOP:
        return Instr(op, (_parse_mark(args, line, col),))
    if Operand.WIDTH in kinds:
        width = _int(args[0], line, col) if args else 32
        if width not in (16, 32):
            raise AsmError(f"array index width must be 16 or 32, got {width}", line, col)
        return Instr(op, (width,))
    expected = {Operand.INC: 2, Operand.FIELD: 2}.get(kinds[0], 1) if kinds else 0
    if len(args) != expected:
        raise AsmError(f"{op.name} takes {expected} operand(s), got {len(args)}", line, col)
    if not kinds:
        return Instr(op)
    kind = kinds[0]
    if kind in (Operand.LOCAL, Operand.VALUE, Operand.AMOUNT, Operand.STATIC):
        v = _int(args[0], line, col)
        if kind is not Operand.VALUE and v < 0:
            raise AsmError(f"{op.name} operand must be non-negative", line, col)
        return Instr(op, (v,))
    if kind is Operand.INC:
        return Instr(op, (_int(args[0], line, col), _int(args[1], line, col)))
    if kind is Operand.FIELD:
        return Instr(op, (args[0], _int(args[1], line, col)))
    if kind in (Operand.LABEL, Operand.METHOD, Operand.CLASS):
        return Instr(op, (args[0],))
    if kind is Operand.KIND:
        k = args[0].upper()
        if k not in ("B", "S", "I", "A"):
            raise AsmError(f"array kind must be B, S, I or A, got {args[0]!r}", line, col)
        return Instr(op, (k,))
    if kind is Operand.TYPE:
        t = args[0].upper()
        if t not in ("S", "I", "A"):
            raise AsmError(f"value type must be S, I or A, got {args[0]!r}", line, col)
        return Instr(op, (t,))
    raise AsmError(f"unhandled operand kind {kind}", line, col)


def _kv(args: list, line: int) -> dict:
    out = {}
    for a in args:
        k, eq, v = a.partition("=")
        out[k.lower()] = v if eq else True
    return out


def parse_assembly(text: str, verify: bool = True) -> Infusion:
    """Parse assembly text into a verified infusion with BRTARGETs inserted."""
    from ..infuser import insert_branch_targets
    from .verify import verify as run_verify

    inf = Infusion()
    entry_name: Optional[str] = None
    method: Optional[MethodDef] = None
    names = set()
    label_refs: dict = {}           # label -> (line, column) of its first use
    for lineno, raw in enumerate(text.splitlines(), 1):
        stripped = raw.split(";", 1)[0]
        line = stripped.strip()
        if not line:
            continue
        col = len(stripped) - len(stripped.lstrip()) + 1
        parts = line.split()
        head = parts[0]
        if head.startswith("."):
            d = head.lower()
            if d == ".method":
                if method is not None:
                    raise AsmError("nested .method (missing .end)", lineno, col)
                if len(parts) != 3 or not _DESC.match(parts[2]):
                    raise AsmError("expected .method NAME (PARAMS)RET", lineno, col)
                name = parts[1]
                if name in names:
                    raise AsmError(f"duplicate method name {name!r}", lineno, col)
                names.add(name)
                pm = _DESC.match(parts[2])
                method = MethodDef(name, pm.group(1), pm.group(2), line=lineno)
            elif d == ".end":
                if method is None:
                    raise AsmError(".end outside a method", lineno, col)
                try:
                    inf.methods.append(insert_branch_targets(method))
                except KeyError as exc:
                    label = exc.args[0]
                    raise AsmError(f"undefined label {label!r} in method {method.name!r}",
                                   *label_refs.get(label, (method.line, 0))) from None
                label_refs = {}
                method = None
            elif d == ".lightweight":
                if method is None:
                    raise AsmError(".lightweight outside a method", lineno, col)
                method.lightweight = True
            elif d == ".locals":
                if method is None or len(parts) != 3:
                    raise AsmError("expected .locals INTS REFS inside a method", lineno, col)
                method.local_int_slots = _int(parts[1], lineno, col)
                method.local_ref_slots = _int(parts[2], lineno, col)
            elif d == ".reserve":
                if method is None or len(parts) != 3:
                    raise AsmError("expected .reserve INTS REFS inside a method", lineno, col)
                method.lw_frame_reserve = _int(parts[1], lineno, col)
                method.lw_ref_reserve = _int(parts[2], lineno, col)
            elif d == ".entry":
                entry_name = parts[1]
            elif d == ".statics":
                kv = _kv(parts[1:], lineno)
                inf.static_int_slots = int(kv.get("ints", 0))
                inf.static_ref_slots = int(kv.get("refs", 0))
            elif d == ".class":
                kv = _kv(parts[2:], lineno)
                parent = kv.get("parent")
                inf.classes.append(ClassDef(parts[1], int(kv.get("ints", 0)), int(kv.get("refs", 0)),
                                            None if parent in (None, "-") else parent,
                                            bool(kv.get("final", False))))
            else:
                raise AsmError(f"unknown directive {head!r}", lineno, col)
            continue
        if method is None:
            raise AsmError("instruction outside a method", lineno, col)
        while True:
            m = re.match(r"^([A-Za-z_.$][\w.$]*):\s*(.*)$", line)
            if not m:
                break
            method.body.append(LabelMark(m.group(1), lineno))
            line = m.group(2)
        if line:
            instr = parse_instruction(line, lineno, col)
            if instr.op.info.branch and isinstance(instr.args[0], str):
                label_refs.setdefault(instr.args[0], (lineno, col))
            method.body.append(instr)
    if method is not None:
        raise AsmError(f"method {method.name!r} missing .end", method.line)
    if entry_name is not None:
        try:
            inf.entry = inf.method_index(entry_name)
        except KeyError:
            raise AsmError(f"entry method {entry_name!r} not defined") from None
    if verify:
        run_verify(inf)
    return inf


def format_instr(instr: Instr) -> str:
    op = instr.op
    kinds = op.info.operands
    if not kinds:
        return op.name
    kind = kinds[0]
    if op is Op.MARKLOOP:
        return f"MARKLOOP {instr.args[0]}"
    if op is Op.BRTARGET:
        return f"L{instr.args[0]}:"
    if kind is Operand.LABEL:
        a = instr.args[0]
        return f"{op.name} L{a}" if isinstance(a, int) else f"{op.name} {a}"
    if kind is Operand.WIDTH:
        return op.name if instr.args[0] == 32 else f"{op.name} {instr.args[0]}"
    return " ".join([op.name] + [str(a) for a in instr.args])


def format_method(m: MethodDef) -> str:
    lines = [f".method {m.name} {m.descriptor}"]
    if m.lightweight:
        lines.append(".lightweight")
    lines.append(f".locals {m.local_int_slots} {m.local_ref_slots}")
    if m.lw_frame_reserve or m.lw_ref_reserve:
        lines.append(f".reserve {m.lw_frame_reserve} {m.lw_ref_reserve}")
    for i in m.body:
        if i.op is Op.BRTARGET:
            lines.append(format_instr(i))
        else:
            lines.append("    " + format_instr(i))
    lines.append(".end")
    return "\n".join(lines)


def format_infusion(inf: Infusion) -> str:
    out = []
    if inf.methods:
        out.append(f".entry {inf.entry_method.name}")
    if inf.static_int_slots or inf.static_ref_slots:
        out.append(f".statics ints={inf.static_int_slots} refs={inf.static_ref_slots}")
    for c in inf.classes:
        extra = f" parent={c.parent}" if c.parent else ""
        extra += " final" if c.final else ""
        out.append(f".class {c.name} ints={c.int_fields} refs={c.ref_fields}{extra}")
    for m in inf.methods:
        out.append("")
        out.append(format_method(m))
    return "\n".join(out) + "\n"
