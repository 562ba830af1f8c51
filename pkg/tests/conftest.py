import time
from contextlib import contextmanager

import pytest

_CRITERIA = {}


class _Outcome:
    def __init__(self):
        self.detail = ""


@pytest.fixture
def criterion():
    """Context manager recording a pass/fail line for an acceptance criterion.

    The block fails if it raises or runs longer than ``limit`` seconds.
    """

    @contextmanager
    def _run(number, title, limit):
        out = _Outcome()
        start = time.perf_counter()
        try:
            yield out
        except BaseException as exc:
            elapsed = time.perf_counter() - start
            msg = str(exc).strip().splitlines()[0] if str(exc).strip() else type(exc).__name__
            _CRITERIA[number] = (False, title, f"{msg} [{elapsed:.1f} s]")
            print(f"criterion {number}: FAIL {title}: {msg}")
            raise
        elapsed = time.perf_counter() - start
        ok = elapsed < limit
        detail = f"{out.detail} [{elapsed:.1f} s, limit {limit:g} s]"
        _CRITERIA[number] = (ok, title, detail)
        print(f"criterion {number}: {'PASS' if ok else 'FAIL'} {title}: {detail}")
        assert ok, f"runtime {elapsed:.1f} s exceeds {limit:g} s"

    return _run


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        ok, title, detail = _CRITERIA[n]
        terminalreporter.write_line(f"{n:>4g}. {'PASS' if ok else 'FAIL'}  {title}: {detail}")
