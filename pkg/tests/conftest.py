import numpy as np
import pytest

from crossdiff import grid as G

# criterion number -> (verdict, detail); filled by test_acceptance.py
ACCEPTANCE: dict = {}


def bump(x, y, cx, cy, r):
    s = ((x - cx) ** 2 + (y - cy) ** 2) / r**2
    return np.where(s < 1, np.exp(1 - 1 / np.maximum(1 - s, 1e-300)), 0.0)


def skt_bumps(n: int) -> G.GridField:
    g = G.Grid((n, n))
    return G.from_function(
        g, lambda x, y: np.stack([bump(x, y, 0.35, 0.4, 0.3), bump(x, y, 0.65, 0.6, 0.3)]),
        bc=G.NEUMANN)


@pytest.fixture
def line64():
    return G.Grid((64,))


@pytest.fixture
def sine_pair(line64):
    return G.from_function(line64, lambda x: np.stack([np.sin(np.pi * x),
                                                       0.5 * np.sin(np.pi * x) ** 2]))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        verdict, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {verdict}  {detail}")
