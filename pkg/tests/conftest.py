import numpy as np
import pytest

from nbtri.datasets import load_dataset

# chain-ladder forecasts printed in bold under the general-insurance data
GI_FORECAST = {
    2: [2],
    3: [5, 2],
    4: [6, 4, 2],
    5: [13, 6, 4, 2],
    6: [17, 11, 5, 4, 2],
    7: [53, 16, 11, 5, 3, 2],
    8: [83, 43, 13, 9, 4, 3, 1],
    9: [101, 74, 38, 11, 8, 4, 2, 1],
    10: [89, 103, 75, 39, 11, 8, 4, 2, 1],
}


@pytest.fixture(scope="session")
def gi():
    return load_dataset("general_insurance")


@pytest.fixture(scope="session")
def auto():
    return load_dataset("automobile")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[k])
