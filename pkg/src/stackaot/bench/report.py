"""Benchmark report rendering: Markdown, CSV and JSON.

Overheads are relative to a reference run: the hand-written native image
where the benchmark has one, otherwise the BASELINE level (labelled as
such).  Per-step figures are changes in percentage points of the reference.
"""

from __future__ import annotations

import csv
import io
import json

from ..isa import CATEGORIES
from .harness import BenchResult, SuiteResult, high_stack_pressure

CSV_FIELDS = ["benchmark", "level", "cycles", "code_bytes", *CATEGORIES, "helper_cycles",
              "reference", "overhead_pct", "inputs", "equivalent"]


def _pct(v: float) -> str:
    return f"{v:+.1f}"


def category_overhead(b: BenchResult, label: str) -> dict:
    """Per-category overhead of one level, in percent of the reference total."""
    ref = b.reference
    m = b.level(label)
    return {c: 100.0 * (m.categories[c] - ref.categories[c]) / ref.cycles for c in CATEGORIES}


def rows(result: SuiteResult) -> list:
    out = []
    for b in result.benches:
        for m in b.levels:
            out.append({
                "benchmark": b.name,
                "level": m.label,
                "cycles": m.cycles,
                "code_bytes": m.code_bytes,
                **{c: m.categories[c] for c in CATEGORIES},
                "helper_cycles": m.helper_cycles,
                "reference": b.reference_label,
                "overhead_pct": round(b.overhead(m), 2),
                "inputs": m.inputs,
                "equivalent": m.equivalent,
            })
    return out


def to_csv(result: SuiteResult) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    w.writerows(rows(result))
    return buf.getvalue()


def to_json(result: SuiteResult) -> str:
    return json.dumps(result.to_dict(), indent=2)


def _table(header: list, body: list) -> list:
    out = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    out += ["| " + " | ".join(str(x) for x in r) + " |" for r in body]
    return out + [""]


def to_markdown(result: SuiteResult) -> str:
    cfg = result.config
    benches = result.benches
    labels = [m.label for m in benches[0].levels] if benches else []
    lines = ["# Benchmark report", "",
             f"Seed {cfg.seed}, {cfg.count} inputs per benchmark ({cfg.scale} scale), "
             f"pin cap {cfg.pin_cap}, {result.elapsed:.1f}s.", ""]

    lines += ["## Equivalence", ""]
    runs = sum(m.inputs for b in benches for m in b.levels)
    if result.ok:
        lines += [f"All {runs} compiled runs match the reference interpreter and the oracle.", ""]
    else:
        lines += [f"{len(result.failures)} mismatches:", ""]
        lines += [f"- {f}" for f in result.failures[:50]] + [""]

    lines += ["## Cycles per level", ""]
    lines += _table(["benchmark", *labels, "native"],
                    [[b.name, *(m.cycles for m in b.levels),
                      b.native.cycles if b.native else "-"] for b in benches])

    if len(labels) > 1:
        lines += ["## Overhead reduction per optimisation (%)", "",
                  "Overhead is `(cycles - reference) / reference`. Step columns give the change "
                  "in percentage points. Where the reference is the baseline level, the "
                  "'before' column is zero by construction.", ""]
        body = []
        for b in benches:
            ov = [b.overhead(m) for m in b.levels]
            body.append([b.name, b.reference_label, f"{ov[0]:.1f}",
                         *(_pct(y - x) for x, y in zip(ov, ov[1:])), f"{ov[-1]:.1f}"])
        lines += _table(["benchmark", "reference", "before", *labels[1:], "after"], body)

        lines += ["## Overhead by category (% of reference cycles)", ""]
        body = []
        for b in benches:
            before = category_overhead(b, labels[0])
            after = category_overhead(b, labels[-1])
            for c in CATEGORIES:
                body.append([b.name, c, f"{before[c]:.1f}", f"{after[c]:.1f}"])
        lines += _table(["benchmark", "category", labels[0], labels[-1]], body)

    lines += ["## Code size (bytes)", ""]
    lines += _table(["benchmark", *labels, "native"],
                    [[b.name, *(m.code_bytes for m in b.levels),
                      b.native.code_bytes if b.native else "-"] for b in benches])

    lines += ["## Ladder regressions", ""]
    regs = result.regressions
    if not regs:
        lines += ["None: cycles never increase along the ladder.", ""]
    for r in regs:
        kind = "permitted (high stack pressure)" if r.allowed else "NOT permitted"
        lines.append(f"- {r.bench}: {r.before} -> {r.after} costs {r.percent:+.1f}% cycles, {kind}")
    if regs:
        lines.append("")

    swept = [b for b in benches if b.sweep]
    if swept:
        caps = sorted(swept[0].sweep)
        lines += ["## Pin-cap sweep (mark-loops level, total cycles)", ""]
        lines += _table(["benchmark", *map(str, caps), "best"],
                        [[b.name, *(b.sweep[c] for c in caps), b.best_pin_cap] for b in swept])

    toggled = [b for b in benches if b.toggles]
    if toggled:
        lines += ["## Transform toggles (mark-loops level)", "",
                  "Cycle change when one transform is switched off.", ""]
        body = []
        for b in toggled:
            on = b.levels[-1].cycles
            for name, m in b.toggles.items():
                body.append([b.name, name, on, m.cycles, _pct(100.0 * (m.cycles - on) / on)])
        lines += _table(["benchmark", "transform", "on", "off", "change %"], body)

    pressure = [b.name for b in benches if high_stack_pressure(b.name)]
    lines += ["## Notes", "",
              "- Absolute overhead percentages depend on input sizes and on the hand-written "
              "native baselines; compare trends, not magnitudes.",
              f"- High stack pressure (mark-loops regression allowed): {', '.join(pressure) or 'none'}.",
              ""]
    return "\n".join(lines)


RENDERERS = {"md": to_markdown, "csv": to_csv, "json": to_json}


def render(result: SuiteResult, fmt: str) -> str:
    try:
        return RENDERERS[fmt](result)
    except KeyError:
        raise ValueError(f"unknown report format {fmt!r}") from None
