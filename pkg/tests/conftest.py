import numpy as np
import pytest

_ACCEPTANCE: dict = {}


@pytest.fixture
def record():
    """Record ``(criterion, ok, detail)`` for the acceptance summary."""

    def _record(criterion: str, ok: bool, detail: str = "") -> bool:
        prev = _ACCEPTANCE.get(criterion)
        if prev is None or (prev[0] and not ok):
            _ACCEPTANCE[criterion] = (bool(ok), detail)
        return bool(ok)

    return _record


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE, key=lambda k: [int(p) if p.isdigit() else p for p in k.replace(".", " ").split()]):
        ok, detail = _ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")
