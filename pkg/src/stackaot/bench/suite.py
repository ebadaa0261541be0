"""The benchmark suite: bytecode sources, seeded input generators and oracles.

Every benchmark takes its data as array arguments and leaves its result in
those arrays (and possibly the return value).  The Python oracle computes
the expected final array contents with the same 16/32-bit wrap-around
arithmetic the bytecode uses, so the checker is independent of both the
interpreter and the simulator.

Sources are written in hand-optimised form: loop invariants hoisted, helpers
inlined, indexes kept in short locals.  Array indexes still pass through
``S2I`` as a Java compiler would emit them, which gives the index-narrowing
transform something to do.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Callable, Optional

from ..bytecode.assembly import parse_assembly
from ..bytecode.model import Infusion
from ..bytecode.opcodes import ELEMENT_SIZE
from ..runtime.layout import STATIC_BASE, heap_base
from ..runtime.memory import ArrayArg, ProgramInput, RunOutcome, to_signed

NATIVE_DIR = Path(__file__).with_name("native")

M32 = 0xFFFFFFFF


def s16(v: int) -> int:
    return to_signed(v, 16)


def s32(v: int) -> int:
    return to_signed(v, 32)


def rotl32(x: int, s: int) -> int:
    """Rotate as the bytecode does it: ``(x << s) | (x >>> (32 - s))``."""
    x &= M32
    left = (x << s) & M32
    right = x >> (32 - s) if 32 - s < 32 else 0
    return s32(left | right)


@dataclass
class Expected:
    value: Optional[int]
    arrays: list                    # final contents of each array argument, signed


@dataclass
class Benchmark:
    name: str
    description: str
    source: str
    make_input: Callable[[random.Random, str], ProgramInput]
    oracle: Callable[[ProgramInput], Expected]
    native: Optional[str] = None    # hand-written native source file name

    @property
    def infusion(self) -> Infusion:
        return _parse(self.name, self.source)

    def native_source(self) -> Optional[str]:
        if self.native is None:
            return None
        return (NATIVE_DIR / self.native).read_text()

    def inputs(self, seed: int, count: int, scale: str = "small") -> list:
        rng = random.Random(f"{self.name}:{seed}")
        out = []
        for k in range(count):
            inp = self.make_input(rng, scale)
            inp.label = f"{self.name}#{seed}.{k}"
            out.append(inp)
        return out

    def check(self, inp: ProgramInput, outcome: RunOutcome) -> Optional[str]:
        """None when the outcome matches the oracle, else a description."""
        if outcome.error:
            return f"run failed: {outcome.error}"
        exp = self.oracle(inp)
        if exp.value is not None and outcome.value != exp.value:
            return f"return value {outcome.value} != expected {exp.value}"
        got = decode_arrays(self.infusion, inp, outcome.state)
        for k, (g, e) in enumerate(zip(got, exp.arrays)):
            if e is not None and g != list(e):
                if len(g) != len(e):
                    return f"array argument {k} has length {len(g)}, expected {len(e)}"
                bad = next(i for i, (x, y) in enumerate(zip(g, e)) if x != y)
                return f"array argument {k} differs at [{bad}]: {g[bad]} != {e[bad]}"
        return None


@lru_cache(maxsize=None)
def _parse(name: str, source: str) -> Infusion:
    return parse_assembly(source)


def decode_arrays(inf: Infusion, inp: ProgramInput, state: bytes) -> list:
    """Read back the array arguments from a final memory state."""
    addr = heap_base(inf.static_int_slots, inf.static_ref_slots) - STATIC_BASE
    out = []
    for a in inp.args:
        if not isinstance(a, ArrayArg):
            continue
        n = state[addr] | state[addr + 1] << 8
        size = ELEMENT_SIZE[a.kind]
        bits = 8 * size if a.kind != "B" else 8
        vals = []
        for i in range(n):
            p = addr + 2 + i * size
            vals.append(to_signed(int.from_bytes(state[p:p + size], "little"), bits))
        out.append(vals)
        addr += 2 + n * size
    return out


def _arrays(inp: ProgramInput) -> list:
    return [list(a.values) for a in inp.args if isinstance(a, ArrayArg)]


# ---------------------------------------------------------------------------
# bubble sort

BSORT = """
.entry bsort
.method bsort (A)V
.locals 4 1
    ALOAD_0
    ARRAYLENGTH
    SCONST_1
    SSUB
    SSTORE_0
    GOTO outer_test
outer:
    SCONST_0
    SSTORE_1
    GOTO inner_test
inner:
    ALOAD_0
    SLOAD_1
    S2I
    SALOAD
    SSTORE_2
    ALOAD_0
    SLOAD_1
    SCONST_1
    SADD
    S2I
    SALOAD
    SSTORE_3
    SLOAD_2
    SLOAD_3
    IF_SCMPLE noswap
    ALOAD_0
    SLOAD_1
    S2I
    SLOAD_3
    SASTORE
    ALOAD_0
    SLOAD_1
    SCONST_1
    SADD
    S2I
    SLOAD_2
    SASTORE
noswap:
    SINC 1 1
inner_test:
    SLOAD_1
    SLOAD_0
    IF_SCMPLT inner
    SINC 0 -1
outer_test:
    SLOAD_0
    IFGT outer
    RETURN
.end
"""


def _short_array(rng: random.Random, n: int, lo: int = -32768, hi: int = 32767) -> list:
    return [rng.randint(lo, hi) for _ in range(n)]


def _bsort_input(rng, scale):
    n = rng.randint(2, 14) if scale == "small" else 256
    return ProgramInput((ArrayArg("S", _short_array(rng, n)),))


def _sorted_oracle(inp):
    return Expected(None, [sorted(inp.args[0].values)])


# ---------------------------------------------------------------------------
# heap sort, sift-down inlined

HSORT = """
.entry hsort
.method hsort (A)V
.locals 6 1
    ALOAD_0
    ARRAYLENGTH
    SSTORE_1
    SLOAD_1
    SCONST_1
    SSHR
    SSTORE_0
top:
    SLOAD_0
    IFLE extract
    SINC 0 -1
    GOTO sift
extract:
    SINC 1 -1
    SLOAD_1
    IFLE done
    ALOAD_0
    SCONST_0
    S2I
    SALOAD
    SSTORE 4
    ALOAD_0
    SCONST_0
    S2I
    ALOAD_0
    SLOAD_1
    S2I
    SALOAD
    SASTORE
    ALOAD_0
    SLOAD_1
    S2I
    SLOAD 4
    SASTORE
sift:
    SLOAD_0
    SSTORE_2
siftloop:
    SLOAD_2
    SCONST_1
    SSHL
    SCONST_1
    SADD
    SSTORE_3
    SLOAD_3
    SLOAD_1
    IF_SCMPGE top
    SLOAD_3
    SCONST_1
    SADD
    SLOAD_1
    IF_SCMPGE nochoose
    ALOAD_0
    SLOAD_3
    S2I
    SALOAD
    ALOAD_0
    SLOAD_3
    SCONST_1
    SADD
    S2I
    SALOAD
    IF_SCMPGE nochoose
    SINC 3 1
nochoose:
    ALOAD_0
    SLOAD_2
    S2I
    SALOAD
    SSTORE 4
    ALOAD_0
    SLOAD_3
    S2I
    SALOAD
    SSTORE 5
    SLOAD 4
    SLOAD 5
    IF_SCMPGE top
    ALOAD_0
    SLOAD_2
    S2I
    SLOAD 5
    SASTORE
    ALOAD_0
    SLOAD_3
    S2I
    SLOAD 4
    SASTORE
    SLOAD_3
    SSTORE_2
    GOTO siftloop
done:
    RETURN
.end
"""


def _hsort_input(rng, scale):
    n = rng.randint(1, 16) if scale == "small" else 256
    return ProgramInput((ArrayArg("S", _short_array(rng, n)),))


# ---------------------------------------------------------------------------
# binary search: look up every key, overwrite it with its index or -1.
# The search loop is the single-exit lower-bound form; equality is tested
# after it, so the loop can be bracketed for register pinning.

BINSEARCH = """
.entry binsearch
.method binsearch (AA)S
.locals 9 2
    ALOAD_1
    ARRAYLENGTH
    SSTORE_1
    ALOAD_0
    ARRAYLENGTH
    SSTORE 6
    SCONST_0
    SSTORE 7
    SCONST_0
    SSTORE_0
    GOTO ktest
kloop:
    ALOAD_1
    SLOAD_0
    S2I
    SALOAD
    SSTORE 5
    SCONST_0
    SSTORE_2
    SLOAD 6
    SSTORE_3
    GOTO btest
bloop:
    SLOAD_2
    SLOAD_3
    SADD
    SCONST_1
    SUSHR
    SSTORE 4
    ALOAD_0
    SLOAD 4
    S2I
    SALOAD
    SLOAD 5
    IF_SCMPGE upper
    SLOAD 4
    SCONST_1
    SADD
    SSTORE_2
    GOTO btest
upper:
    SLOAD 4
    SSTORE_3
btest:
    SLOAD_2
    SLOAD_3
    IF_SCMPLT bloop
    SCONST_M1
    SSTORE 8
    SLOAD_2
    SLOAD 6
    IF_SCMPGE store
    ALOAD_0
    SLOAD_2
    S2I
    SALOAD
    SLOAD 5
    IF_SCMPNE store
    SLOAD_2
    SSTORE 8
    SINC 7 1
store:
    ALOAD_1
    SLOAD_0
    S2I
    SLOAD 8
    SASTORE
    SINC 0 1
ktest:
    SLOAD_0
    SLOAD_1
    IF_SCMPLT kloop
    SLOAD 7
    SRETURN
.end
"""


def _binsearch_input(rng, scale):
    if scale == "small":
        n, nk = rng.randint(1, 24), rng.randint(1, 8)
    else:
        n, nk = 256, 64
    data = sorted(rng.sample(range(-20000, 20000), n))
    keys = [rng.choice(data) if rng.random() < 0.6 else rng.randint(-20000, 20000)
            for _ in range(nk)]
    return ProgramInput((ArrayArg("S", data), ArrayArg("S", keys)))


def _binsearch_oracle(inp):
    data, keys = _arrays(inp)
    out, found = [], 0
    for key in keys:
        lo, hi = 0, len(data)
        while lo < hi:
            mid = ((lo + hi) & 0xFFFF) >> 1
            if data[mid] < key:
                lo = mid + 1
            else:
                hi = mid
        if lo < len(data) and data[lo] == key:
            out.append(lo)
            found += 1
        else:
            out.append(-1)
    return Expected(found, [data, out])


# ---------------------------------------------------------------------------
# fixed-point radix-2 FFT, Q14 twiddles, scaled by 1/2 per stage

FFT = """
.entry fft
.method fft (AAAA)V
.locals 16 4
    ALOAD_0
    ARRAYLENGTH
    SSTORE_0
    SCONST_0
    SSTORE_2
    SCONST_0
    SSTORE_1
    GOTO rtest
rloop:
    SLOAD_1
    SLOAD_2
    IF_SCMPGE noswap
    ALOAD_0
    SLOAD_1
    S2I
    SALOAD
    SSTORE 14
    ALOAD_0
    SLOAD_1
    S2I
    ALOAD_0
    SLOAD_2
    S2I
    SALOAD
    SASTORE
    ALOAD_0
    SLOAD_2
    S2I
    SLOAD 14
    SASTORE
    ALOAD_1
    SLOAD_1
    S2I
    SALOAD
    SSTORE 14
    ALOAD_1
    SLOAD_1
    S2I
    ALOAD_1
    SLOAD_2
    S2I
    SALOAD
    SASTORE
    ALOAD_1
    SLOAD_2
    S2I
    SLOAD 14
    SASTORE
noswap:
    SLOAD_0
    SCONST_1
    SSHR
    SSTORE_3
    GOTO ktest
kloop:
    SLOAD_2
    SLOAD_3
    SSUB
    SSTORE_2
    SLOAD_3
    SCONST_1
    SSHR
    SSTORE_3
ktest:
    SLOAD_3
    SLOAD_2
    IF_SCMPLE kloop
    SLOAD_2
    SLOAD_3
    SADD
    SSTORE_2
    SINC 1 1
rtest:
    SLOAD_1
    SLOAD_0
    SCONST_1
    SSUB
    IF_SCMPLT rloop
    SLOAD_0
    SCONST_1
    SSHR
    SSTORE 9
    SCONST_1
    SSTORE 4
    GOTO letest
leloop:
    SLOAD 4
    SCONST_1
    SSHL
    SSTORE 5
    SCONST_0
    SSTORE 6
    SCONST_0
    SSTORE 15
    GOTO mtest
mloop:
    ALOAD_2
    SLOAD 15
    S2I
    SALOAD
    SSTORE 7
    ALOAD_3
    SLOAD 15
    S2I
    SALOAD
    SSTORE 8
    SLOAD 6
    SSTORE_1
    GOTO itest
iloop:
    SLOAD_1
    SLOAD 4
    SADD
    SSTORE_2
    SLOAD 7
    S2I
    ALOAD_0
    SLOAD_2
    S2I
    SALOAD
    S2I
    IMUL
    SLOAD 8
    S2I
    ALOAD_1
    SLOAD_2
    S2I
    SALOAD
    S2I
    IMUL
    ISUB
    ICONST 15
    ISHR
    I2S
    SSTORE 10
    SLOAD 7
    S2I
    ALOAD_1
    SLOAD_2
    S2I
    SALOAD
    S2I
    IMUL
    SLOAD 8
    S2I
    ALOAD_0
    SLOAD_2
    S2I
    SALOAD
    S2I
    IMUL
    IADD
    ICONST 15
    ISHR
    I2S
    SSTORE 11
    ALOAD_0
    SLOAD_1
    S2I
    SALOAD
    SCONST_1
    SSHR
    SSTORE 12
    ALOAD_1
    SLOAD_1
    S2I
    SALOAD
    SCONST_1
    SSHR
    SSTORE 13
    ALOAD_0
    SLOAD_2
    S2I
    SLOAD 12
    SLOAD 10
    SSUB
    SASTORE
    ALOAD_1
    SLOAD_2
    S2I
    SLOAD 13
    SLOAD 11
    SSUB
    SASTORE
    ALOAD_0
    SLOAD_1
    S2I
    SLOAD 12
    SLOAD 10
    SADD
    SASTORE
    ALOAD_1
    SLOAD_1
    S2I
    SLOAD 13
    SLOAD 11
    SADD
    SASTORE
    SLOAD_1
    SLOAD 5
    SADD
    SSTORE_1
itest:
    SLOAD_1
    SLOAD_0
    IF_SCMPLT iloop
    SINC 6 1
    SLOAD 15
    SLOAD 9
    SADD
    SSTORE 15
mtest:
    SLOAD 6
    SLOAD 4
    IF_SCMPLT mloop
    SLOAD 5
    SSTORE 4
    SLOAD 9
    SCONST_1
    SSHR
    SSTORE 9
letest:
    SLOAD 4
    SLOAD_0
    IF_SCMPLT leloop
    RETURN
.end
"""


def twiddles(n: int) -> tuple:
    half = max(n // 2, 1)
    wr = [round(16384 * math.cos(2 * math.pi * k / n)) for k in range(half)]
    wi = [round(-16384 * math.sin(2 * math.pi * k / n)) for k in range(half)]
    return wr, wi


def _fft_input(rng, scale):
    n = rng.choice((2, 4, 8)) if scale == "small" else 64
    wr, wi = twiddles(n)
    return ProgramInput((ArrayArg("S", _short_array(rng, n, -8000, 8000)),
                         ArrayArg("S", _short_array(rng, n, -8000, 8000)),
                         ArrayArg("S", wr), ArrayArg("S", wi)))


def _fft_oracle(inp):
    re, im, cos_t, sin_t = _arrays(inp)
    n = len(re)
    j = 0
    for i in range(n - 1):
        if i < j:
            re[i], re[j] = re[j], re[i]
            im[i], im[j] = im[j], im[i]
        k = n >> 1
        while k <= j:
            j = s16(j - k)
            k >>= 1
        j = s16(j + k)
    le, tstep = 1, n >> 1
    while le < n:
        istep = s16(le << 1)
        tidx = 0
        for m in range(le):
            wr, wi = cos_t[tidx], sin_t[tidx]
            i = m
            while i < n:
                j = s16(i + le)
                tr = s16(s32(wr * re[j] - wi * im[j]) >> 15)
                ti = s16(s32(wr * im[j] + wi * re[j]) >> 15)
                qr, qi = re[i] >> 1, im[i] >> 1
                re[j], im[j] = s16(qr - tr), s16(qi - ti)
                re[i], im[i] = s16(qr + tr), s16(qi + ti)
                i = s16(i + istep)
            tidx = s16(tidx + tstep)
        le = istep
        tstep >>= 1
    return Expected(None, [re, im, cos_t, sin_t])


# ---------------------------------------------------------------------------
# XXTEA block encryption

DELTA = s32(0x9E3779B9)

_MX = """
    ILOAD 6
    ICONST 5
    IUSHR
    ILOAD 8
    ICONST 2
    ISHL
    IXOR
    ILOAD 8
    ICONST 3
    IUSHR
    ILOAD 6
    ICONST 4
    ISHL
    IXOR
    IADD
    ILOAD 4
    ILOAD 8
    IXOR
    ALOAD_1
    SLOAD_2
    SCONST_3
    SAND
    SLOAD_3
    SXOR
    S2I
    IALOAD
    ILOAD 6
    IXOR
    IADD
    IXOR"""

XXTEA = f"""
.entry xxtea
.method xxtea (AA)S
.locals 10 2
    ALOAD_0
    ARRAYLENGTH
    SSTORE_0
    SIPUSH 52
    SLOAD_0
    SDIV
    SCONST 6
    SADD
    SSTORE_1
    ICONST 0
    ISTORE 4
    ALOAD_0
    SLOAD_0
    SCONST_1
    SSUB
    S2I
    IALOAD
    ISTORE 6
round:
    ILOAD 4
    ICONST {DELTA}
    IADD
    ISTORE 4
    ILOAD 4
    ICONST 2
    IUSHR
    I2S
    SCONST_3
    SAND
    SSTORE_3
    SCONST_0
    SSTORE_2
    GOTO ptest
ploop:
    ALOAD_0
    SLOAD_2
    SCONST_1
    SADD
    S2I
    IALOAD
    ISTORE 8
    ALOAD_0
    SLOAD_2
    S2I
    IALOAD{_MX}
    IADD
    ISTORE 6
    ALOAD_0
    SLOAD_2
    S2I
    ILOAD 6
    IASTORE
    SINC 2 1
ptest:
    SLOAD_2
    SLOAD_0
    SCONST_1
    SSUB
    IF_SCMPLT ploop
    ALOAD_0
    SCONST_0
    S2I
    IALOAD
    ISTORE 8
    ALOAD_0
    SLOAD_2
    S2I
    IALOAD{_MX}
    IADD
    ISTORE 6
    ALOAD_0
    SLOAD_2
    S2I
    ILOAD 6
    IASTORE
    SINC 1 -1
    SLOAD_1
    IFGT round
    ILOAD 4
    I2S
    SRETURN
.end
"""


def _int_array(rng, n):
    return [rng.randint(-2**31, 2**31 - 1) for _ in range(n)]


def _xxtea_input(rng, scale):
    n = rng.randint(2, 4) if scale == "small" else 8
    return ProgramInput((ArrayArg("I", _int_array(rng, n)), ArrayArg("I", _int_array(rng, 4))))


def xxtea_encrypt(v: list, key: list) -> tuple:
    v = [x & M32 for x in v]
    key = [x & M32 for x in key]
    n = len(v)
    rounds = 6 + 52 // n
    total = 0
    z = v[n - 1]
    while rounds > 0:
        total = (total + DELTA) & M32
        e = (total >> 2) & 3
        for p in range(n):
            y = v[(p + 1) % n]
            mx = ((((z >> 5) ^ (y << 2)) + ((y >> 3) ^ (z << 4))) ^
                  ((total ^ y) + (key[(p & 3) ^ e] ^ z))) & M32
            v[p] = (v[p] + mx) & M32
            z = v[p]
        rounds -= 1
    return [s32(x) for x in v], s16(total)


def _xxtea_oracle(inp):
    v, key = _arrays(inp)
    out, total = xxtea_encrypt(v, key)
    return Expected(total, [out, key])


# ---------------------------------------------------------------------------
# MD5 compression of one block; rounds unrolled four steps per loop pass

MD5_SHIFTS = ((7, 12, 17, 22), (5, 9, 14, 20), (4, 11, 16, 23), (6, 10, 15, 21))
MD5_T = [s32(int(abs(math.sin(i + 1)) * 2**32)) for i in range(64)]
MD5_IV = [s32(x) for x in (0x67452301, 0xEFCDAB89, 0x98BADCFE, 0x10325476)]

# int locals: a=0, b=2, c=4, d=6, f=8 (two slots each); i=10, j=11
_A, _B, _C, _D, _F, _I, _J = 0, 2, 4, 6, 8, 10, 11


def _md5_f(r: int, y: int, z: int, w: int) -> list:
    if r == 0:
        return [f"ILOAD {y}", f"ILOAD {z}", "IAND", f"ILOAD {y}", "ICONST -1", "IXOR",
                f"ILOAD {w}", "IAND", "IOR"]
    if r == 1:
        return [f"ILOAD {w}", f"ILOAD {y}", "IAND", f"ILOAD {w}", "ICONST -1", "IXOR",
                f"ILOAD {z}", "IAND", "IOR"]
    if r == 2:
        return [f"ILOAD {y}", f"ILOAD {z}", "IXOR", f"ILOAD {w}", "IXOR"]
    return [f"ILOAD {z}", f"ILOAD {y}", f"ILOAD {w}", "ICONST -1", "IXOR", "IOR", "IXOR"]


def _md5_g(r: int) -> list:
    mul, add = ((1, 0), (5, 1), (3, 5), (7, 0))[r]
    out = [f"SLOAD {_I}"]
    if mul != 1:
        out += [f"SCONST {mul}", "SMUL"]
    if add:
        out += [f"SCONST {add}", "SADD"]
    return out + ["SCONST 15", "SAND"]


def _md5_step(r: int, x: int, y: int, z: int, w: int, s: int) -> list:
    return ([f"ILOAD {x}"] + _md5_f(r, y, z, w) + ["IADD", "ALOAD_1"] + _md5_g(r) +
            ["S2I", "IALOAD", "IADD", "ALOAD_2", f"SLOAD {_I}", "S2I", "IALOAD", "IADD",
             f"ISTORE {_F}",
             f"ILOAD {y}", f"ILOAD {_F}", f"ICONST {s}", "ISHL", f"ILOAD {_F}",
             f"ICONST {32 - s}", "IUSHR", "IOR", "IADD", f"ISTORE {x}", f"SINC {_I} 1"])


def _md5_source() -> str:
    lines = [".entry md5", ".method md5 (AAA)V", ".locals 12 3"]
    for k, slot in enumerate((_A, _B, _C, _D)):
        lines += ["ALOAD_0", f"SCONST {k}", "S2I", "IALOAD", f"ISTORE {slot}"]
    lines += ["SCONST_0", f"SSTORE {_I}"]
    roles = ((_A, _B, _C, _D), (_D, _A, _B, _C), (_C, _D, _A, _B), (_B, _C, _D, _A))
    for r in range(4):
        lines += ["SCONST_0", f"SSTORE {_J}", f"round{r}:"]
        for k, (x, y, z, w) in enumerate(roles):
            lines += _md5_step(r, x, y, z, w, MD5_SHIFTS[r][k])
        lines += [f"SINC {_J} 1", f"SLOAD {_J}", "SCONST 4", f"IF_SCMPLT round{r}"]
    for k, slot in enumerate((_A, _B, _C, _D)):
        lines += ["ALOAD_0", f"SCONST {k}", "S2I", "ALOAD_0", f"SCONST {k}", "S2I", "IALOAD",
                  f"ILOAD {slot}", "IADD", "IASTORE"]
    lines += ["RETURN", ".end"]
    return "\n".join(ln if ln.endswith(":") or ln.startswith(".") else "    " + ln
                     for ln in lines) + "\n"


MD5 = _md5_source()


def md5_block(message: bytes) -> list:
    """Pad a message shorter than 56 bytes into one block of 16 signed words."""
    if len(message) > 55:
        raise ValueError("single-block messages only")
    block = message + b"\x80" + bytes(55 - len(message)) + (8 * len(message)).to_bytes(8, "little")
    return [s32(int.from_bytes(block[4 * i:4 * i + 4], "little")) for i in range(16)]


def md5_compress(state: list, block: list) -> list:
    a, b, c, d = (x & M32 for x in state)
    m = [x & M32 for x in block]
    for i in range(64):
        r = i // 16
        if r == 0:
            f, g = (b & c) | (~b & d), i
        elif r == 1:
            f, g = (d & b) | (~d & c), (5 * i + 1) & 15
        elif r == 2:
            f, g = b ^ c ^ d, (3 * i + 5) & 15
        else:
            f, g = c ^ (b | (~d & M32)), (7 * i) & 15
        f = (a + (f & M32) + (MD5_T[i] & M32) + m[g]) & M32
        s = MD5_SHIFTS[r][i % 4]
        a, d, c = d, c, b
        b = (b + (((f << s) | (f >> (32 - s))) & M32)) & M32
    return [s32((x + y) & M32) for x, y in zip(state, (a, b, c, d))]


def _md5_input(rng, scale):
    msg = bytes(rng.randrange(256) for _ in range(rng.randint(0, 55)))
    return ProgramInput((ArrayArg("I", MD5_IV), ArrayArg("I", md5_block(msg)),
                         ArrayArg("I", MD5_T)))


def _md5_oracle(inp):
    state, block, t = _arrays(inp)
    return Expected(None, [md5_compress(state, block), block, t])


# ---------------------------------------------------------------------------
# RC5-32/12: key expansion plus block encryption

P32 = s32(0xB7E15163)

_RC5_ROTL = """
    ILOAD 7
    SLOAD 9
    INVOKESTATIC rotl"""

RC5 = f"""
.entry rc5
.method rotl (IS)I
.lightweight
.locals 3 0
    ILOAD_0
    SLOAD_2
    S2I
    ISHL
    ILOAD_0
    BIPUSH 32
    SLOAD_2
    SSUB
    S2I
    IUSHR
    IOR
    IRETURN
.end
.method rc5 (AAA)S
.locals 12 3
    ALOAD_0
    SCONST_0
    S2I
    ICONST {P32}
    IASTORE
    SCONST_1
    SSTORE 4
    GOTO inittest
init:
    ALOAD_0
    SLOAD 4
    S2I
    ALOAD_0
    SLOAD 4
    SCONST_1
    SSUB
    S2I
    IALOAD
    ICONST {DELTA}
    IADD
    IASTORE
    SINC 4 1
inittest:
    SLOAD 4
    ALOAD_0
    ARRAYLENGTH
    IF_SCMPLT init
    ICONST 0
    ISTORE_0
    ICONST 0
    ISTORE_2
    SCONST_0
    SSTORE 4
    SCONST_0
    SSTORE 5
    SCONST_0
    SSTORE 6
ks:
    ALOAD_0
    SLOAD 4
    S2I
    IALOAD
    ILOAD_0
    IADD
    ILOAD_2
    IADD
    ISTORE 7
    ILOAD 7
    ICONST 3
    ISHL
    ILOAD 7
    ICONST 29
    IUSHR
    IOR
    ISTORE_0
    ALOAD_0
    SLOAD 4
    S2I
    ILOAD_0
    IASTORE
    ILOAD_0
    ILOAD_2
    IADD
    ISTORE 7
    ILOAD 7
    I2S
    SCONST 31
    SAND
    SSTORE 9
    ALOAD_1
    SLOAD 5
    S2I
    IALOAD
    ILOAD 7
    IADD
    ISTORE 7{_RC5_ROTL}
    ISTORE_2
    ALOAD_1
    SLOAD 5
    S2I
    ILOAD_2
    IASTORE
    SINC 4 1
    SLOAD 4
    ALOAD_0
    ARRAYLENGTH
    IF_SCMPLT noreset
    SCONST_0
    SSTORE 4
noreset:
    SLOAD 5
    SCONST_1
    SADD
    SCONST_3
    SAND
    SSTORE 5
    SINC 6 1
    SLOAD 6
    SIPUSH 78
    IF_SCMPLT ks
    ALOAD_2
    ARRAYLENGTH
    SSTORE 11
    SCONST_0
    SSTORE 10
    GOTO btest
blk:
    ALOAD_2
    SLOAD 10
    S2I
    IALOAD
    ALOAD_0
    SCONST_0
    S2I
    IALOAD
    IADD
    ISTORE_0
    ALOAD_2
    SLOAD 10
    SCONST_1
    SADD
    S2I
    IALOAD
    ALOAD_0
    SCONST_1
    S2I
    IALOAD
    IADD
    ISTORE_2
    SCONST_2
    SSTORE 4
rnd:
    ILOAD_0
    ILOAD_2
    IXOR
    ISTORE 7
    ILOAD_2
    I2S
    SCONST 31
    SAND
    SSTORE 9{_RC5_ROTL}
    ALOAD_0
    SLOAD 4
    S2I
    IALOAD
    IADD
    ISTORE_0
    ILOAD_2
    ILOAD_0
    IXOR
    ISTORE 7
    ILOAD_0
    I2S
    SCONST 31
    SAND
    SSTORE 9{_RC5_ROTL}
    ALOAD_0
    SLOAD 4
    SCONST_1
    SADD
    S2I
    IALOAD
    IADD
    ISTORE_2
    SINC 4 2
    SLOAD 4
    ALOAD_0
    ARRAYLENGTH
    IF_SCMPLT rnd
    ALOAD_2
    SLOAD 10
    S2I
    ILOAD_0
    IASTORE
    ALOAD_2
    SLOAD 10
    SCONST_1
    SADD
    S2I
    ILOAD_2
    IASTORE
    SINC 10 2
btest:
    SLOAD 10
    SLOAD 11
    IF_SCMPLT blk
    ILOAD_0
    I2S
    SRETURN
.end
"""

RC5_TABLE = 26          # 2 * (12 rounds + 1)


def _rc5_input(rng, scale):
    words = 2 * (rng.randint(1, 2) if scale == "small" else 8)
    return ProgramInput((ArrayArg("I", [0] * RC5_TABLE), ArrayArg("I", _int_array(rng, 4)),
                         ArrayArg("I", _int_array(rng, words))))


def rc5_encrypt(key: list, data: list) -> tuple:
    """Returns (expanded table, final key words, ciphertext, last A)."""
    table = [P32]
    for _ in range(1, RC5_TABLE):
        table.append(s32(table[-1] + DELTA))
    key = list(key)
    a = b = i = j = 0
    for _ in range(3 * RC5_TABLE):
        a = table[i] = rotl32(table[i] + a + b, 3)
        t = s32(a + b)
        b = key[j] = rotl32(key[j] + t, t & 31)
        i = (i + 1) % RC5_TABLE
        j = (j + 1) & 3
    out = list(data)
    for k in range(0, len(data), 2):
        a = s32(data[k] + table[0])
        b = s32(data[k + 1] + table[1])
        for r in range(1, 13):
            a = s32(rotl32(a ^ b, b & 31) + table[2 * r])
            b = s32(rotl32(b ^ a, a & 31) + table[2 * r + 1])
        out[k], out[k + 1] = a, b
    return table, key, out, s16(a)


def _rc5_oracle(inp):
    _, key, data = _arrays(inp)
    table, key, out, last = rc5_encrypt(key, data)
    return Expected(last, [table, key, out])


# ---------------------------------------------------------------------------

BENCHMARKS = {
    b.name: b for b in (
        Benchmark("bsort", "bubble sort of a short array", BSORT, _bsort_input, _sorted_oracle,
                  native="bsort.nasm"),
        Benchmark("hsort", "heap sort of a short array", HSORT, _hsort_input, _sorted_oracle),
        Benchmark("binsearch", "binary search of a batch of keys", BINSEARCH, _binsearch_input,
                  _binsearch_oracle, native="binsearch.nasm"),
        Benchmark("fft", "fixed-point radix-2 FFT", FFT, _fft_input, _fft_oracle),
        Benchmark("xxtea", "XXTEA block encryption", XXTEA, _xxtea_input, _xxtea_oracle),
        Benchmark("md5", "MD5 compression of one block", MD5, _md5_input, _md5_oracle),
        Benchmark("rc5", "RC5-32/12 key schedule and encryption", RC5, _rc5_input, _rc5_oracle),
    )
}


def get(name: str) -> Benchmark:
    try:
        return BENCHMARKS[name]
    except KeyError:
        raise KeyError(f"unknown benchmark {name!r}; choose from {', '.join(BENCHMARKS)}") from None
