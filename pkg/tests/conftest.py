import random

import pytest

from shapestar import ambients as A
from shapestar.gen import random_ma, random_pi

_ACCEPTANCE: list = []


@pytest.fixture
def record():
    """Record one acceptance line; printed again in the terminal summary."""
    def rec(number: int, ok: bool, detail: str = ""):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        print(line)
        _ACCEPTANCE.append((number, line))
    return rec


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)


def pi_corpus(n: int, seed: int = 0, size: int = 8):
    rng = random.Random(seed)
    return [random_pi(rng, size=size) for _ in range(n)]


def ma_corpus(n: int, seed: int = 0, size: int = 8, annotate: bool = False):
    rng = random.Random(seed)
    out = []
    while len(out) < n:
        p = random_ma(rng, size=size, annotate=annotate)
        if A.ma_well_scoped(p):
            out.append(p)
    return out
