"""Shared fixtures; collects the acceptance-criterion verdict lines."""
import contextlib

import pytest

_LINES = pytest.StashKey[list]()


class _Criterion:
    def __init__(self, number, title):
        self.number, self.title = number, title
        self.checks = []

    def check(self, name, ok, detail=""):
        self.checks.append((name, bool(ok), detail))
        return bool(ok)

    def line(self, error=None):
        failed = [c for c in self.checks if not c[1]]
        verdict = "PASS" if error is None and not failed and self.checks else "FAIL"
        parts = [f"{n}={'ok' if ok else 'FAILED'}" + (f" ({d})" if d else "") for n, ok, d in self.checks]
        if error is not None:
            parts.append(f"error: {type(error).__name__}: {error}")
        return f"criterion {self.number} [{verdict}] {self.title}: " + "; ".join(parts)


@pytest.fixture
def criterion(request):
    """``with criterion(n, title) as c: c.check(name, ok, detail)``; records one verdict line."""
    lines = request.config.stash.setdefault(_LINES, [])

    @contextlib.contextmanager
    def run(number, title):
        crit = _Criterion(number, title)
        try:
            yield crit
        except Exception as exc:
            lines.append(crit.line(exc))
            print(lines[-1])
            raise
        lines.append(crit.line())
        print(lines[-1])
        failed = [f"{n} ({d})" for n, ok, d in crit.checks if not ok]
        assert not failed, "; ".join(failed)

    return run


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
