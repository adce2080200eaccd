import numpy as np
import pytest

from adatrpo.harness import generate_chain, generate_garnet

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def garnet():
    return generate_garnet(6, 3, 3, 11, 12)


@pytest.fixture
def chain2():
    return generate_chain(2, 0.0)
