"""Whole-program compilation into a loadable code image.

Image file layout::

    "SIMG"  u16 version  u32 header length  header (UTF-8 JSON)  code (words)

The JSON header carries the method table, frame layouts, the static and
class tables the runtime needs, a source map from native address to
(method, bytecode index) and the per-method branch-target address tables.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field
from typing import Optional

from ..bytecode.model import ClassDef, Infusion
from ..isa import NativeInstruction, category, decode_all, encode_all, word_size
from ..runtime.helpers import Helper
from ..runtime.layout import RET_INT_LO, RET_SHORT, Z_REG, frame_layout
from .codegen import OptLevel, callee_info, compile_method
from .emit import N

MAGIC = b"SIMG"
VERSION = 1


class ImageError(ValueError):
    pass


@dataclass
class MethodEntry:
    name: str
    address: int
    size: int
    lightweight: bool
    params: str
    returns: str
    local_int_slots: int
    local_ref_slots: int
    frame_size: int
    int_base: int
    ref_base: int
    ref_stack_base: int
    bytecode_length: int = 0
    clobbers: list = field(default_factory=list)


@dataclass
class CodeImage:
    level: str
    pin_cap: int
    entry: int
    static_int_slots: int
    static_ref_slots: int
    classes: list                 # dicts: name, int_fields, ref_fields, parent, final
    methods: list                 # MethodEntry
    code: list                    # NativeInstruction, in address order from 0
    source_map: list              # (address, method index, bytecode index)
    labels: list                  # per method: {branch-target id: address}
    boot_size: int = 0

    # derived views -------------------------------------------------------
    def addresses(self) -> list:
        out, a = [], 0
        for ins in self.code:
            out.append(a)
            a += word_size(ins)
        return out

    @property
    def size_words(self) -> int:
        return sum(word_size(i) for i in self.code)

    def method_named(self, name: str) -> MethodEntry:
        for m in self.methods:
            if m.name == name:
                return m
        raise KeyError(name)

    def method_index(self, name: str) -> int:
        for i, m in enumerate(self.methods):
            if m.name == name:
                return i
        raise KeyError(name)

    def method_at(self, address: int) -> Optional[int]:
        for i, m in enumerate(self.methods):
            if m.address <= address < m.address + m.size:
                return i
        return None

    def class_defs(self) -> list:
        return [ClassDef(**c) for c in self.classes]

    def listing(self, method: Optional[str] = None) -> str:
        """Annotated disassembly, optionally of a single method."""
        src = {a: (mi, bc) for a, mi, bc in self.source_map}
        lines = []
        current = None
        for a, ins in zip(self.addresses(), self.code):
            mi = self.method_at(a)
            if method is not None and (mi is None or self.methods[mi].name != method):
                continue
            if mi != current:
                current = mi
                title = "<boot>" if mi is None else self.methods[mi].name
                lines.append(f"; {title}")
            bc = src.get(a, (None, -1))[1]
            where = f"bc{bc}" if bc >= 0 else ""
            lines.append(f"{a:05x}  {str(ins):<22} ; {category(ins):<10} {where}".rstrip())
        return "\n".join(lines) + "\n"

    # serialisation -------------------------------------------------------
    def to_bytes(self) -> bytes:
        header = {
            "level": self.level,
            "pin_cap": self.pin_cap,
            "entry": self.entry,
            "static_int_slots": self.static_int_slots,
            "static_ref_slots": self.static_ref_slots,
            "classes": self.classes,
            "methods": [asdict(m) for m in self.methods],
            "source_map": [list(x) for x in self.source_map],
            "labels": [{str(k): v for k, v in d.items()} for d in self.labels],
            "categories": [[a, category(i)] for a, i in zip(self.addresses(), self.code)],
            "boot_size": self.boot_size,
        }
        blob = json.dumps(header, separators=(",", ":")).encode()
        return MAGIC + struct.pack("<HI", VERSION, len(blob)) + blob + encode_all(self.code)

    @classmethod
    def from_bytes(cls, data: bytes) -> "CodeImage":
        if data[:4] != MAGIC:
            raise ImageError("not a code image (bad magic)")
        if len(data) < 10:
            raise ImageError("truncated image header")
        version, hlen = struct.unpack("<HI", data[4:10])
        if version != VERSION:
            raise ImageError(f"unsupported image version {version}")
        try:
            header = json.loads(data[10:10 + hlen].decode())
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ImageError(f"corrupt image header: {exc}") from None
        code = decode_all(data[10 + hlen:])
        return cls(header["level"], header["pin_cap"], header["entry"],
                   header["static_int_slots"], header["static_ref_slots"], header["classes"],
                   [MethodEntry(**m) for m in header["methods"]], code,
                   [tuple(x) for x in header["source_map"]],
                   [{int(k): v for k, v in d.items()} for d in header["labels"]],
                   header.get("boot_size", 0))

    def write(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def read(cls, path) -> "CodeImage":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


def boot_stub(inf: Infusion) -> list:
    """Invoke the entry method like an ordinary static call, then stop."""
    entry = inf.entry_method
    if entry.lightweight:
        raise ImageError(f"entry method {entry.name!r} is lightweight")
    layout = frame_layout(entry)
    out = [NativeInstruction(N.CALL, target=Helper.PREINVOKE.address)]
    for reg, value in ((RET_SHORT, inf.entry), (RET_INT_LO, 2 * entry.param_slots),
                       (20, 2 * entry.param_refs), (Z_REG, layout.size)):
        out.append(NativeInstruction(N.LDI, rd=reg, imm=value & 0xFF))
        out.append(NativeInstruction(N.LDI, rd=reg + 1, imm=(value >> 8) & 0xFF))
    out.append(NativeInstruction(N.CALL, target=Helper.CALL_METHOD.address))
    out.append(NativeInstruction(N.CALL, target=Helper.POSTINVOKE.address))
    out.append(NativeInstruction(N.BREAK))
    return out


def compile_infusion(inf: Infusion, level=OptLevel.MARK_LOOPS, pin_cap: int = 7,
                     record: bool = False, streams: Optional[dict] = None):
    """Compile every method; returns the image (and per-method results if ``record``).

    ``streams`` optionally maps method names to instruction iterables used
    instead of the method bodies (for streaming checks).
    """
    level = OptLevel(level)
    code = boot_stub(inf)
    address = sum(word_size(i) for i in code)
    boot_size = address
    source_map = [(a, -1, -1) for a in _addrs(code, 0)]
    entries, labels, infos, results = [], [], {}, {}
    for idx, m in enumerate(inf.methods):
        stream = streams.get(m.name) if streams else None
        cm = compile_method(m, inf, level, pin_cap, address, infos, stream, record)
        infos[m.name] = callee_info(cm, m, idx)
        for a, bc in zip(_addrs(cm.code, address), cm.bc_of):
            source_map.append((a, idx, bc))
        lay = cm.layout
        entries.append(MethodEntry(m.name, address, cm.size, m.lightweight, m.params, m.returns,
                                   m.local_int_slots, m.local_ref_slots, lay.size, lay.int_base,
                                   lay.ref_base, lay.ref_stack_base, len(m.body),
                                   sorted(cm.clobbers)))
        labels.append(cm.labels)
        code.extend(cm.code)
        address += cm.size
        results[m.name] = cm
    classes = [{"name": c.name, "int_fields": c.int_fields, "ref_fields": c.ref_fields,
                "parent": c.parent, "final": c.final} for c in inf.classes]
    image = CodeImage(level.short, pin_cap, inf.entry, inf.static_int_slots,
                      inf.static_ref_slots, classes, entries, code, source_map, labels,
                      boot_size)
    return (image, results) if record else image


def _addrs(code: list, base: int) -> list:
    out, a = [], base
    for ins in code:
        out.append(a)
        a += word_size(ins)
    return out
