import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from structcox.survival import SurvivalDataset

settings.register_profile("default", deadline=None, max_examples=50,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_dataset(rng, n, k, ties=False):
    """Design ``(n, k)`` on [-1, 1] and a censored dataset with at least one event."""
    X = rng.uniform(-1, 1, size=(n, k))
    T = rng.exponential(size=n)
    D = rng.exponential(2.0, size=n)
    Z = np.minimum(T, D)
    if ties:
        Z = np.round(Z, 1) + 0.1
    status = (T <= D).astype(int)
    status[int(rng.integers(n))] = 1
    return X, SurvivalDataset.from_arrays(Z, status, rng.uniform(size=(n, 1)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(mod.VERDICTS):
        terminalreporter.write_line(line)
