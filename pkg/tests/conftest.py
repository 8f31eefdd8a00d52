import numpy as np
import pytest

from lossest import RegressionData


def random_data(seed: int, n: int | None = None, p: int | None = None, m: int = 1) -> RegressionData:
    rng = np.random.default_rng(seed)
    n = int(rng.integers(20, 51)) if n is None else n
    p = int(rng.integers(3, 9)) if p is None else p
    X = rng.standard_normal((n, p))
    beta = rng.standard_normal((p, m))
    Y = X @ beta + rng.standard_normal((n, m))
    return RegressionData(X, Y)


@pytest.fixture
def data20x5():
    return random_data(42, 20, 5)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        ok, detail = results[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
