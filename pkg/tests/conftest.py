import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

_ACCEPTANCE: list[str] = []


@pytest.fixture
def record_criterion():
    """Print and remember one PASS/FAIL line for an acceptance criterion."""

    def record(number: int, title: str, passed: bool, detail: str) -> None:
        line = f"criterion {number:2d} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
        print(line)
        _ACCEPTANCE.append(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)


@pytest.fixture
def ar1_series():
    """Gaussian AR(1), rho = 0.5, length 200."""

    def make(seed: int, n: int = 200, rho: float = 0.5, burn: int = 100) -> np.ndarray:
        gen = np.random.default_rng(seed)
        e = gen.normal(size=n + burn)
        y = np.empty(n + burn)
        y[0] = e[0]
        for t in range(1, n + burn):
            y[t] = rho * y[t - 1] + e[t]
        return y[burn:]

    return make
