import pytest

_verdicts = []


class Verdict:
    """Prints one PASS/FAIL line per acceptance criterion and keeps it for the summary."""

    def __init__(self, reporter):
        self.reporter = reporter

    def __call__(self, label, ok, detail=""):
        line = f"{label}: {'PASS' if ok else 'FAIL'}  {detail}".rstrip()
        _verdicts.append(line)
        if self.reporter is not None:
            self.reporter.ensure_newline()
            self.reporter.write_line(line)
        return ok


@pytest.fixture
def verdict(request):
    return Verdict(request.config.pluginmanager.get_plugin("terminalreporter"))


def pytest_terminal_summary(terminalreporter):
    if _verdicts:
        terminalreporter.section("acceptance criteria")
        for line in _verdicts:
            terminalreporter.write_line(line)
