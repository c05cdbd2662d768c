import pytest

from lacelab.topology import build_graph

# acceptance lines collected by tests/test_acceptance.py
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def q1():
    return build_graph("qn", 1)


@pytest.fixture(scope="session")
def q2():
    return build_graph("qn", 2)


@pytest.fixture(scope="session")
def q3():
    return build_graph("qn", 3)


@pytest.fixture(scope="session")
def t23():
    return build_graph("torus", 2, 3)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
        terminalreporter.write_line(line)
