import csv
import hashlib
import io
import json

import pytest

from stackaot.bench import harness, report, suite
from stackaot.bench.figures import write_figures
from stackaot.runtime.interpreter import Interpreter

M32 = suite.M32


def _digest(words):
    return b"".join((w & M32).to_bytes(4, "little") for w in words)


@pytest.mark.parametrize("message", [b"", b"abc", b"message digest", bytes(range(55))])
def test_md5_oracle_matches_hashlib(message):
    state = suite.md5_compress(suite.MD5_IV, suite.md5_block(message))
    assert _digest(state) == hashlib.md5(message).digest()


def test_md5_block_rejects_long_messages():
    with pytest.raises(ValueError):
        suite.md5_block(bytes(56))


def test_xxtea_oracle_known_vector():
    out, _ = suite.xxtea_encrypt([0, 0], [0, 0, 0, 0])
    assert [w & M32 for w in out] == [0x053704AB, 0x575D8C80]


def test_rc5_oracle_known_vector():
    _, _, out, _ = suite.rc5_encrypt([0, 0, 0, 0], [0, 0])
    assert [w & M32 for w in out] == [0xEEDBA521, 0x6D8F4B15]


def test_rotl32():
    assert suite.rotl32(1, 31) & M32 == 0x80000000
    assert suite.rotl32(suite.s32(0x80000001), 1) == 3


@pytest.mark.parametrize("name", list(suite.BENCHMARKS))
def test_inputs_are_deterministic(name):
    bench = suite.get(name)
    a = bench.inputs(4, 3)
    b = bench.inputs(4, 3)
    assert [x.args for x in a] == [x.args for x in b]
    assert [x.label for x in a] == [f"{name}#4.{k}" for k in range(3)]
    assert [x.args for x in bench.inputs(5, 3)] != [x.args for x in a]


@pytest.mark.parametrize("name", list(suite.BENCHMARKS))
def test_interpreter_agrees_with_oracle(name):
    bench = suite.get(name)
    interp = Interpreter(bench.infusion)
    for inp in bench.inputs(9, 4) + bench.inputs(9, 1, "full"):
        assert bench.check(inp, interp.run(inp)) is None, inp.label


def test_check_reports_array_mismatch():
    bench = suite.get("bsort")
    inp = bench.inputs(1, 1)[0]
    outcome = Interpreter(bench.infusion).run(inp)
    broken = type(outcome)(outcome.value, bytes(len(outcome.state)), None)
    assert "array argument 0" in bench.check(inp, broken)


def test_unknown_benchmark():
    with pytest.raises(KeyError):
        suite.get("nope")


def test_high_stack_pressure_is_objective():
    flagged = {n for n in suite.BENCHMARKS if harness.high_stack_pressure(n)}
    assert flagged == {"xxtea", "md5", "rc5"}


@pytest.fixture(scope="module")
def small_suite():
    config = harness.BenchConfig(count=2, sweep=True, toggles=True)
    return harness.run_suite(["bsort", "hsort"], config, workers=1)


def test_benchmark_result_shape(small_suite):
    assert small_suite.ok
    bsort, hsort = small_suite.benches
    assert [m.label for m in bsort.levels] == ["baseline", "peephole", "cache", "popped", "markloop"]
    assert bsort.native is not None and bsort.reference_label == "native"
    assert hsort.native is None and hsort.reference_label == "baseline"
    assert hsort.overhead(hsort.levels[0]) == 0.0
    assert set(bsort.sweep) == set(harness.SWEEP_CAPS)
    assert bsort.best_pin_cap in harness.SWEEP_CAPS
    assert set(bsort.toggles) == set(harness.TOGGLES)
    for m in bsort.levels:
        assert m.inputs == 2 and m.code_bytes > 0
        assert sum(m.categories.values()) == m.cycles


def test_ladder_improves(small_suite):
    for b in small_suite.benches:
        cycles = [m.cycles for m in b.levels]
        assert cycles[-1] < cycles[0]
        assert not [r for r in b.regressions() if not r.allowed]


def test_measurement_records_failures():
    from stackaot.compiler.image import compile_infusion
    from stackaot.infuser import infuse

    bench = suite.get("bsort")
    inputs = bench.inputs(1, 1)
    good = Interpreter(bench.infusion).run(inputs[0])
    bogus = type(good)(good.value, bytes(len(good.state)), None)
    m = harness._measure("x", compile_infusion(infuse(bench.infusion)), bench, inputs, [bogus])
    assert not m.equivalent and "differs from interpreter" in m.failures[0]


def test_reports(small_suite):
    md = report.to_markdown(small_suite)
    assert "bsort" in md and "markloop" in md and "|" in md
    table = list(csv.DictReader(io.StringIO(report.to_csv(small_suite))))
    assert {r["benchmark"] for r in table} == {"bsort", "hsort"}
    assert set(report.CSV_FIELDS) <= set(table[0])
    data = json.loads(report.to_json(small_suite))
    assert data["failures"] == []
    assert data["benchmarks"][0]["best_pin_cap"] is not None
    for fmt in report.RENDERERS:
        assert report.render(small_suite, fmt)


def test_figures(small_suite, tmp_path):
    paths = write_figures(small_suite, tmp_path / "rep")
    names = sorted(p.name for p in paths)
    assert names == ["rep-categories.png", "rep-ladder.png", "rep-sweep.png"]
    for p in paths:
        assert p.read_bytes()[:4] == b"\x89PNG"


def test_config_levels_subset():
    config = harness.BenchConfig(levels=("baseline", "markloop"), count=1, native=False)
    b = harness.run_benchmark("binsearch", config)
    assert [m.label for m in b.levels] == ["baseline", "markloop"]
    assert b.native is None and not b.failures


def test_random_seed_changes_totals():
    cfg = [harness.BenchConfig(levels=("markloop",), count=3, seed=s, native=False) for s in (1, 2)]
    a, b = (harness.run_benchmark("bsort", c) for c in cfg)
    assert a.levels[0].cycles != b.levels[0].cycles
