import pytest
from hypothesis import HealthCheck, settings

import acceptance_report

settings.register_profile(
    "repo", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("repo")


DIAMOND = """\
nodes 4
s u 1
s v 1
u t 1
v t 1
u v 1
"""


@pytest.fixture
def diamond():
    from divcode.netgraph import parse_topology

    return parse_topology(DIAMOND)


def pytest_terminal_summary(terminalreporter):
    if not acceptance_report.LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(acceptance_report.LINES):
        terminalreporter.write_line(line[1])
