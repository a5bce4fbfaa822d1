import pytest

from bidgames.arena import bowtie

# acceptance outcomes, filled in by test_acceptance.py and printed at the end
CRITERIA: dict = {}


def record(n: int, part: str, passed: bool, detail: str = "") -> None:
    CRITERIA.setdefault(n, []).append((part, bool(passed), detail))


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(CRITERIA):
        parts = CRITERIA[n]
        ok = all(p for _, p, _ in parts)
        tr.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}")
        for part, p, detail in parts:
            tr.write_line(f"    {'ok  ' if p else 'FAIL'} {part}: {detail}")


@pytest.fixture
def bow():
    return bowtie()
