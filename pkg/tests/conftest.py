from __future__ import annotations

import pytest

_LINES = pytest.StashKey[list]()


@pytest.fixture
def acceptance_log(request) -> list[str]:
    return request.config.stash.setdefault(_LINES, [])


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s[2:4])):
            terminalreporter.write_line(line)
