import numpy as np
import pytest

ACCEPTANCE_LINES: list[str] = []

from dilated.selfcheck import random_lattice, standardize


@pytest.fixture
def rng():
    return np.random.default_rng(42)


def fibre_pairs(rng, n, mean=0.0, var=1.0, vary_var=False):
    """Pairs of random lattice measures sharing mean (and variance unless vary_var)."""
    out = []
    for _ in range(n):
        v1 = float(rng.uniform(0.5, 2.0)) if vary_var else var
        v2 = float(rng.uniform(0.5, 2.0)) if vary_var else var
        a = standardize(random_lattice(rng, int(rng.integers(3, 9))), mean, v1)
        b = standardize(random_lattice(rng, int(rng.integers(3, 9))), mean, v2)
        out.append((a, b))
    return out


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
