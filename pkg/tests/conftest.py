import numpy as np
import pytest

from radsearch.dataset import write_csv
from radsearch.synthetic import t1


@pytest.fixture
def t1_ds():
    return t1()


@pytest.fixture
def t1_csv(tmp_path):
    path = tmp_path / "t1.csv"
    write_csv(t1(), path)
    return path


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
