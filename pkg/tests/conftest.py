import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20260814)


@pytest.fixture
def report(capsys):
    """Print a single live pass/fail line, bypassing output capture."""

    def _report(name, ok, detail=""):
        tag = "PASS" if ok else "FAIL"
        with capsys.disabled():
            print(f"[{tag}] {name}: {detail}".rstrip())

    return _report
