"""Code images for hand-written native baselines.

A native routine is wrapped as the image's only method, with the same
parameters as the benchmark's entry method and a frame that holds just the
reference arguments (at Y+0, Y+2, ...) and the int arguments after them.
It is entered through the ordinary boot stub, so the invoke envelope is
identical to the compiled image's and cancels out of overhead figures.
"""

from __future__ import annotations

from ..bytecode.model import Infusion, MethodDef
from ..compiler.image import CodeImage, MethodEntry, boot_stub
from ..isa import parse_native, word_size


def native_image(source: str, like: Infusion) -> CodeImage:
    entry = like.entry_method
    m = MethodDef(entry.name, entry.params, entry.returns,
                  local_int_slots=entry.param_slots, local_ref_slots=entry.param_refs)
    # refs first so their offsets do not depend on the int arguments
    ref_base = 0
    int_base = 2 * m.local_ref_slots
    frame = int_base + 2 * m.local_int_slots
    stub = boot_stub(Infusion(methods=[m], entry=0))
    boot_size = sum(word_size(i) for i in stub)
    code, _labels = parse_native(source)
    size = sum(word_size(i) for i in code)
    me = MethodEntry(m.name, boot_size, size, False, m.params, m.returns,
                     m.local_int_slots, m.local_ref_slots, frame, int_base, ref_base, frame)
    addrs, a = [], 0
    for ins in stub + code:
        addrs.append(a)
        a += word_size(ins)
    source_map = [(ad, -1 if ad < boot_size else 0, -1) for ad in addrs]
    return CodeImage("native", 0, 0, like.static_int_slots, like.static_ref_slots, [], [me],
                     stub + code, source_map, [{}], boot_size)
