"""Command-line interface: infuse, compile, run and bench."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional

from .bytecode.assembly import AsmError, format_infusion, parse_assembly
from .bytecode.binfmt import MAGIC as SINF_MAGIC, FormatError, read_infusion, write_infusion
from .bytecode.model import Infusion
from .bytecode.verify import VerifyError
from .compiler.codegen import LEVELS, CompileError, OptLevel
from .compiler.image import CodeImage, ImageError, compile_infusion
from .infuser import InfuseOptions, InfuserError, infuse
from .runtime.interpreter import Interpreter
from .runtime.machine import Machine, MachineError
from .runtime.memory import ArrayArg, ProgramInput

log = logging.getLogger("stackaot")

LEVEL_NAMES = [l.short for l in LEVELS]


class UsageError(Exception):
    pass


def _load_program(path: Path) -> tuple:
    """Returns (infusion, already infused?) from a .sasm or .sinf file."""
    data = path.read_bytes()
    if path.suffix == ".sasm" or not data.startswith(SINF_MAGIC):
        return parse_assembly(data.decode()), False
    return read_infusion(data), True


def _infused(path: Path) -> Infusion:
    inf, done = _load_program(path)
    return inf if done else infuse(inf)


def parse_arg(text: str):
    """``12`` or ``-3`` for numbers, ``null``, or ``KIND:v1,v2,...`` for arrays."""
    if text.lower() == "null":
        return None
    kind, sep, rest = text.partition(":")
    if sep:
        kind = kind.upper()
        if kind not in ("B", "S", "I", "A"):
            raise UsageError(f"array kind must be B, S, I or A in {text!r}")
        try:
            values = [int(v, 0) for v in rest.split(",") if v.strip()]
        except ValueError:
            raise UsageError(f"bad array values in {text!r}") from None
        return ArrayArg(kind, values)
    try:
        return int(text, 0)
    except ValueError:
        raise UsageError(f"bad argument {text!r}") from None


# ---------------------------------------------------------------------------
# subcommands

def cmd_infuse(args) -> int:
    inf, done = _load_program(Path(args.input))
    if done:
        raise UsageError(f"{args.input} is already infused")
    opts = InfuseOptions(constshift=not args.no_constshift, simul=not args.no_simul,
                         narrow_idx=not args.no_narrow_idx, markloop=not args.no_markloop,
                         lightweight=not args.no_lightweight)
    out = infuse(inf, opts)
    Path(args.output).write_bytes(write_infusion(out))
    if args.print:
        sys.stdout.write(format_infusion(out))
    return 0


def cmd_compile(args) -> int:
    inf = _infused(Path(args.input))
    level = OptLevel.parse(args.level)
    record = bool(args.states)
    compiled = compile_infusion(inf, level, args.pin_cap, record=record)
    image, results = compiled if record else (compiled, None)
    image.write(args.output)
    if args.listing:
        text = image.listing(args.method)
        if args.listing == "-":
            sys.stdout.write(text)
        else:
            Path(args.listing).write_text(text)
    if record:
        lines = []
        for name, cm in results.items():
            if args.method and name != args.method:
                continue
            lines.append(f"; {name}")
            for bc, instr, state in cm.states:
                lines.append(f"{bc:4d}  {instr:<24} {state}")
        text = "\n".join(lines) + "\n"
        if args.states == "-":
            sys.stdout.write(text)
        else:
            Path(args.states).write_text(text)
    print(f"{args.output}: {image.size_words * 2} bytes of code, level {level.short}, "
          f"pin cap {args.pin_cap}", file=sys.stderr)
    return 0


def cmd_run(args) -> int:
    path = Path(args.input)
    inp = ProgramInput(tuple(parse_arg(a) for a in args.args))
    if args.interpret:
        inf, _ = _load_program(path)
        outcome = Interpreter(inf).run(inp)
        print(json.dumps({"return_value": outcome.value, "error": outcome.error}))
        return 0 if outcome.error is None else 1
    data = path.read_bytes()
    if data.startswith(b"SIMG"):
        image = CodeImage.from_bytes(data)
    else:
        image = compile_infusion(_infused(path), OptLevel.parse(args.level), args.pin_cap)
    trace = args.trace is not None
    result = Machine(image, max_steps=args.max_steps).run(inp, trace=trace)
    if trace:
        result.write_trace_csv(args.trace)
        summary = Path(args.summary or Path(args.trace).with_suffix(".json"))
        result.write_summary_json(summary)
    elif args.summary:
        result.write_summary_json(args.summary)
    print(json.dumps(result.summary()))
    return 0 if result.outcome.error is None else 1


def cmd_bench(args) -> int:
    from .bench import harness, report, suite

    if args.list:
        for b in suite.BENCHMARKS.values():
            extra = " (native baseline)" if b.native else ""
            print(f"{b.name:10s} {b.description}{extra}")
        return 0
    levels = tuple(OptLevel.parse(l).short for l in (args.levels or LEVEL_NAMES))
    config = harness.BenchConfig(levels=levels, seed=args.seed, count=args.inputs,
                                 scale=args.scale, pin_cap=args.pin_cap,
                                 sweep=args.pin_cap_sweep, toggles=args.toggles)
    result = harness.run_suite(args.bench, config, workers=args.workers)
    text = report.render(result, args.report)
    if args.output:
        out = Path(args.output)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text)
        stem = out.with_suffix("")
        if args.report != "csv":
            Path(str(stem) + ".csv").write_text(report.to_csv(result))
        if args.report != "md":
            Path(str(stem) + ".md").write_text(report.to_markdown(result))
        if not args.no_figures:
            from .bench.figures import write_figures

            for p in write_figures(result, stem):
                print(f"wrote {p}", file=sys.stderr)
    else:
        sys.stdout.write(text)
    for r in result.regressions:
        kind = "permitted" if r.allowed else "NOT permitted"
        print(f"regression: {r.bench} {r.before}->{r.after} {r.percent:+.1f}% ({kind})",
              file=sys.stderr)
    if not result.ok:
        print(f"{len(result.failures)} equivalence failure(s)", file=sys.stderr)
        for f in result.failures[:20]:
            print(f"  {f}", file=sys.stderr)
        return 1
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stackaot", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("infuse", help="run host-side transforms on bytecode assembly")
    q.add_argument("input")
    q.add_argument("-o", "--output", required=True, help="binary infusion (.sinf)")
    for name in ("constshift", "simul", "narrow-idx", "markloop", "lightweight"):
        q.add_argument(f"--no-{name}", action="store_true")
    q.add_argument("--print", action="store_true", help="also print the result as assembly")
    q.set_defaults(func=cmd_infuse)

    q = sub.add_parser("compile", help="translate infused bytecode to a native code image")
    q.add_argument("input", help=".sinf, or .sasm (infused with every transform first)")
    q.add_argument("-o", "--output", required=True)
    q.add_argument("--level", default="markloop", choices=LEVEL_NAMES)
    q.add_argument("--pin-cap", type=int, default=7, choices=range(0, 8), metavar="N")
    q.add_argument("--listing", metavar="FILE", help="write an annotated listing ('-' = stdout)")
    q.add_argument("--states", metavar="FILE", help="write cache states per instruction")
    q.add_argument("--method", help="restrict listing and states to one method")
    q.set_defaults(func=cmd_compile)

    q = sub.add_parser("run", help="execute a program on the simulator")
    q.add_argument("input", help=".img, .sinf or .sasm")
    q.add_argument("args", nargs="*", help="entry arguments: 5, -3, null, S:1,2,3")
    q.add_argument("--level", default="markloop", choices=LEVEL_NAMES)
    q.add_argument("--pin-cap", type=int, default=7, choices=range(0, 8), metavar="N")
    q.add_argument("--trace", metavar="CSV", help="write a per-instruction trace")
    q.add_argument("--summary", metavar="JSON", help="summary path (default: next to trace)")
    q.add_argument("--max-steps", type=int, default=50_000_000)
    q.add_argument("--interpret", action="store_true", help="use the reference interpreter")
    q.set_defaults(func=cmd_run)

    q = sub.add_parser("bench", help="run the benchmark suite")
    q.add_argument("--bench", action="append", metavar="NAME", help="repeatable; default all")
    q.add_argument("--levels", nargs="+", choices=LEVEL_NAMES)
    q.add_argument("--pin-cap-sweep", action="store_true")
    q.add_argument("--toggles", action="store_true", help="measure each transform switched off")
    q.add_argument("--seed", type=int, default=1)
    q.add_argument("--inputs", type=int, default=100, help="inputs per benchmark")
    q.add_argument("--scale", choices=("small", "full"), default="small")
    q.add_argument("--pin-cap", type=int, default=7, choices=range(0, 8), metavar="N")
    q.add_argument("--workers", type=int, default=None)
    q.add_argument("--report", choices=("md", "csv", "json"), default="md")
    q.add_argument("-o", "--output", help="report file; CSV/MD and figures go alongside")
    q.add_argument("--no-figures", action="store_true")
    q.add_argument("--list", action="store_true", help="list benchmarks and exit")
    q.set_defaults(func=cmd_bench)
    return p


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, AsmError, VerifyError, FormatError, InfuserError, CompileError,
            ImageError, MachineError, ValueError, OSError) as exc:
        print(f"stackaot: error: {exc}", file=sys.stderr)
        return 2
    except KeyError as exc:
        print(f"stackaot: error: {exc.args[0]}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
