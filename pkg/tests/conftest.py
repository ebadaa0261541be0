import os
import sys
from contextlib import contextmanager

sys.path.insert(0, os.path.dirname(__file__))

_VERDICTS: list = []


@contextmanager
def _criterion(number: int, title: str):
    try:
        yield
    except BaseException as exc:
        line = f"FAIL criterion {number:2d}: {title} ({type(exc).__name__}: {exc})"
        _VERDICTS.append((number, line.splitlines()[0]))
        print(line)
        raise
    line = f"PASS criterion {number:2d}: {title}"
    _VERDICTS.append((number, line))
    print(line)


def pytest_configure(config):
    config.criterion = _criterion


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_VERDICTS):
        terminalreporter.write_line(line)
