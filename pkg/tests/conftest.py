import numpy as np
import pytest

from heisenberg_aag import group as G

# Lines recorded by test_acceptance.py, echoed in the terminal summary.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_element(params, rng, lo=1, hi=12):
    return G.evaluate_word(params, G.random_word(params, (lo, hi), rng))


def gens(n):
    """(a_1..a_n, b_1..b_n, c) for H^{2n+1}."""
    p = G.GroupParams(n)
    a = [G.generator(p, i) for i in range(n)]
    b = [G.generator(p, n + i) for i in range(n)]
    return a, b, G.generator(p, 2 * n)
