import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from scipy import stats

settings.register_profile(
    "default", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


def binomial_floor(trials: int, p: float, alpha: float = 0.01) -> int:
    """Smallest count c with P(Binomial(trials, p) < c) <= alpha."""
    return int(stats.binom.ppf(alpha, trials, p))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


_CRITERIA: list[str] = []


@pytest.fixture
def criterion():
    """Record one acceptance line; the lines are repeated in the terminal summary."""
    def record(number: int, name: str, ok: bool, detail: str, seconds: float) -> bool:
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {name}: {detail} [{seconds:.1f}s]"
        _CRITERIA.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance")
        for line in sorted(_CRITERIA):
            terminalreporter.write_line(line)
