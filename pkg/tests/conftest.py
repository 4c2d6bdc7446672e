import pytest

_ACCEPTANCE = []


class _Recorder:
    def record(self, criterion: int, title: str, passed: bool, elapsed: float, detail: str) -> str:
        status = "PASS" if passed else "FAIL"
        line = f"[{status}] criterion {criterion}: {title} ({elapsed:.1f} s) {detail}"
        print(line)
        _ACCEPTANCE.append((criterion, line))
        return line


@pytest.fixture
def acceptance():
    return _Recorder()


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_ACCEPTANCE):
        terminalreporter.write_line(line)
