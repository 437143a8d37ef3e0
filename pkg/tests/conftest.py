import numpy as np
import pytest

from umbilic import damon, scale_space as ss

# acceptance verdicts collected by test_acceptance, printed at the end of the run
ACCEPTANCE: dict[int, tuple[bool, str]] = {}

DAMON_WINDOW = (-1.5, -1.5, 1.5, 1.5)
DAMON_H = 1 / 256
DAMON_LADDER = [float(s) for s in np.linspace(1 / 720, 1 / 36, 64)]
CREATION_WINDOW = (-0.5, -0.5, 0.5, 0.5)
CREATION_H = 1 / 512
CREATION_LADDER = [0.0] + [float(s) for s in np.geomspace(1e-5, 1e-3, 12)]


@pytest.fixture(scope="session")
def damon_run():
    initial = ss.sample(damon.F, DAMON_WINDOW, DAMON_H, s=DAMON_LADDER[0])
    return ss.track(initial, DAMON_LADDER)


@pytest.fixture(scope="session")
def creation_run():
    initial = ss.sample(damon.F, CREATION_WINDOW, CREATION_H, s=0.0)
    return ss.track(initial, CREATION_LADDER)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
