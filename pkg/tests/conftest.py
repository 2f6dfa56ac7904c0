from collections import OrderedDict

import pytest

_CRITERIA = OrderedDict()


@pytest.fixture
def criterion():
    """Record one sub-check of an acceptance criterion: ``criterion(n, ok, detail)``."""

    def record(n, ok, detail):
        _CRITERIA.setdefault(n, []).append((bool(ok), detail))
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        checks = _CRITERIA[n]
        ok = all(c for c, _ in checks)
        tr.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  " + "; ".join(d for _, d in checks))
