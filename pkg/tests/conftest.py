import numpy as np
import pytest
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from vpfft import material as M

FERRITE = M.MaterialParams(E=206.824e9, nu=0.3, gamma0_dot=1e-3, m=0.05, sigma0=425e6, h=940e6)

finite = st.floats(-1.0, 1.0, allow_nan=False, allow_subnormal=False)
mandel = arrays(np.float64, 6, elements=finite)
sym3 = arrays(np.float64, (3, 3), elements=finite).map(lambda a: 0.5 * (a + a.T))


@pytest.fixture
def ferrite():
    return FERRITE


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE = {}


def record(criterion, passed, detail):
    """Store one acceptance outcome; printed in the terminal summary."""
    ACCEPTANCE[criterion] = (bool(passed), detail)
    print(f"\n[criterion {criterion}] {'PASS' if passed else 'FAIL'}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(str(k).split(".")[0]), str(k))):
        passed, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if passed else 'FAIL'} - {detail}")
