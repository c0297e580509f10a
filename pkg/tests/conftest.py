import pytest

# criterion number -> list of (label, passed) pairs recorded by test_acceptance
ACCEPTANCE: dict[int, list[tuple[str, bool]]] = {}


@pytest.fixture
def record():
    def _record(crit: int, label: str, passed: bool) -> bool:
        ACCEPTANCE.setdefault(crit, []).append((label, bool(passed)))
        return passed
    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for crit in range(1, 13):
        parts = ACCEPTANCE.get(crit)
        if parts is None:
            terminalreporter.write_line(f"criterion {crit:2d}: NOT RUN")
            continue
        verdict = "PASS" if all(ok for _, ok in parts) else "FAIL"
        failed = [label for label, ok in parts if not ok]
        detail = f"  ({'; '.join(failed)})" if failed else ""
        terminalreporter.write_line(f"criterion {crit:2d}: {verdict}{detail}")
