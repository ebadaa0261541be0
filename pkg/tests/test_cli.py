import json

import pytest

import helpers
from stackaot.cli import UsageError, main, parse_arg
from stackaot.runtime.memory import ArrayArg


@pytest.fixture
def sum_sasm(tmp_path):
    path = tmp_path / "sum.sasm"
    path.write_text(helpers.SUM_TO)
    return path


def _json_line(out: str) -> dict:
    return json.loads(out.strip().splitlines()[-1])


def test_parse_arg():
    assert parse_arg("12") == 12 and parse_arg("-0x10") == -16
    assert parse_arg("null") is None
    assert parse_arg("S:1,-2,3") == ArrayArg("S", [1, -2, 3])
    with pytest.raises(UsageError):
        parse_arg("Q:1")
    with pytest.raises(UsageError):
        parse_arg("twelve")


def test_infuse_writes_binary_and_prints(sum_sasm, tmp_path, capsys):
    out = tmp_path / "sum.sinf"
    assert main(["infuse", str(sum_sasm), "-o", str(out), "--print"]) == 0
    assert out.read_bytes()[:4] == b"SAOT"
    assert "MARKLOOP" in capsys.readouterr().out
    again = tmp_path / "again.sinf"
    assert main(["infuse", str(out), "-o", str(again)]) == 2      # already infused


def test_infuse_toggles(sum_sasm, tmp_path, capsys):
    out = tmp_path / "sum.sinf"
    assert main(["infuse", str(sum_sasm), "-o", str(out), "--no-markloop", "--print"]) == 0
    assert "MARKLOOP" not in capsys.readouterr().out


def test_compile_listing_and_states(sum_sasm, tmp_path, capsys):
    img = tmp_path / "sum.img"
    code = main(["compile", str(sum_sasm), "-o", str(img), "--level", "popped",
                 "--listing", "-", "--states", str(tmp_path / "states.txt")])
    assert code == 0
    captured = capsys.readouterr()
    assert "push/pop" in captured.out or "load/store" in captured.out
    assert "bytes of code" in captured.err
    assert img.read_bytes()[:4] == b"SIMG"
    states = (tmp_path / "states.txt").read_text()
    assert states.startswith("; sum") and "Int1" in states


def test_run_variants(sum_sasm, tmp_path, capsys):
    assert main(["run", str(sum_sasm), "24"]) == 0
    fast = _json_line(capsys.readouterr().out)
    assert fast["return_value"] == 276
    assert main(["run", str(sum_sasm), "24", "--level", "baseline"]) == 0
    slow = _json_line(capsys.readouterr().out)
    assert slow["return_value"] == 276 and slow["cycles"] > fast["cycles"]
    assert main(["run", str(sum_sasm), "24", "--interpret"]) == 0
    assert _json_line(capsys.readouterr().out) == {"return_value": 276, "error": None}


def test_run_image_with_trace(sum_sasm, tmp_path, capsys):
    img = tmp_path / "sum.img"
    assert main(["compile", str(sum_sasm), "-o", str(img)]) == 0
    trace = tmp_path / "t.csv"
    assert main(["run", str(img), "5", "--trace", str(trace)]) == 0
    assert _json_line(capsys.readouterr().out)["return_value"] == 10
    assert trace.read_text().startswith("pc,opcode,category,cycles,taken")
    summary = json.loads(trace.with_suffix(".json").read_text())
    assert summary["return_value"] == 10


def test_run_with_arrays(tmp_path, capsys):
    src = tmp_path / "first.sasm"
    src.write_text(".entry f\n.method f (A)S\n.locals 0 1\n  ALOAD_0\n  SCONST_0\n"
                   "  SALOAD 16\n  SRETURN\n.end\n")
    assert main(["run", str(src), "S:-7,8"]) == 0
    assert _json_line(capsys.readouterr().out)["return_value"] == -7


def test_run_failure_exit_code(tmp_path, capsys):
    src = tmp_path / "div.sasm"
    src.write_text(".entry f\n.method f (S)S\n.locals 1 0\n  SCONST_1\n  SLOAD_0\n"
                   "  SDIV\n  SRETURN\n.end\n")
    assert main(["run", str(src), "0"]) == 1
    assert "division by zero" in capsys.readouterr().out


def test_errors_exit_with_2(tmp_path, capsys):
    bad = tmp_path / "bad.sasm"
    bad.write_text(".entry f\n.method f ()V\n.locals 0 0\n  FROB\n.end\n")
    assert main(["compile", str(bad), "-o", str(tmp_path / "x.img")]) == 2
    assert "stackaot: error" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.sasm")]) == 2
    assert main(["run", str(tmp_path / "bad.sasm"), "--interpret"]) == 2


def test_bench_list(capsys):
    assert main(["bench", "--list"]) == 0
    out = capsys.readouterr().out
    for name in ("bsort", "md5", "rc5"):
        assert name in out
    assert "native baseline" in out


def test_bench_report_with_figures(tmp_path, capsys):
    out = tmp_path / "rep" / "bench.md"
    code = main(["bench", "--bench", "bsort", "--inputs", "2", "--workers", "1",
                 "--pin-cap-sweep", "-o", str(out)])
    assert code == 0
    assert "bsort" in out.read_text()
    assert (tmp_path / "rep" / "bench.csv").exists()
    for fig in ("ladder", "categories", "sweep"):
        assert (tmp_path / "rep" / f"bench-{fig}.png").exists()


@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_bench_stdout_formats(fmt, capsys):
    code = main(["bench", "--bench", "binsearch", "--inputs", "1", "--workers", "1",
                 "--levels", "baseline", "markloop", "--report", fmt])
    assert code == 0
    out = capsys.readouterr().out
    if fmt == "json":
        assert json.loads(out)["benchmarks"][0]["name"] == "binsearch"
    else:
        assert out.startswith("benchmark,level,cycles")


def test_bench_unknown_name(capsys):
    assert main(["bench", "--bench", "nope", "--inputs", "1"]) == 2
    assert "unknown benchmark" in capsys.readouterr().err
