import math

import numpy as np
import pytest

from maprank import Listing

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line[1])


def make_listings(logits, xs=None, ys=None, prefix="l"):
    n = len(logits)
    xs = [0.0] * n if xs is None else xs
    ys = [0.0] * n if ys is None else ys
    return [Listing(f"{prefix}{i:03d}", float(x), float(y), float(lg)) for i, (lg, x, y) in enumerate(zip(logits, xs, ys))]


def random_listings(rng, n, spread=2.0, coords=True):
    logits = -rng.exponential(spread / 2, size=n)
    xs = rng.uniform(-0.5, 0.5, n) if coords else np.zeros(n)
    ys = rng.uniform(-0.5, 0.5, n) if coords else np.zeros(n)
    return make_listings(logits, xs, ys)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


LN_HALF = math.log(0.5)
