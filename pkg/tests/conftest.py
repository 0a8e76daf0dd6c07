import pytest

_LINES = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """Report one acceptance criterion: records a PASS/FAIL line, then asserts."""
    lines = request.config.stash.setdefault(_LINES, [])

    def report(label, passed, detail):
        line = f"{'PASS' if passed else 'FAIL'}  {label}: {detail}"
        lines.append(line)
        print(line)
        assert passed, line

    return report


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
