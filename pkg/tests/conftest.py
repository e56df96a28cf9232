import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from lomn import QuoteSeries

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_walk_series(rng, n=2000, sigma=0.01, q=0.0005, side="ask"):
    """Brownian log-price plus one-sided exponential noise on ``t_i = i/n``."""
    x = np.concatenate(([0.0], np.cumsum(sigma * rng.standard_normal(n) / np.sqrt(n))))
    eps = q * rng.exponential(size=n + 1)
    y = x + eps if side == "ask" else x - eps
    return QuoteSeries.equispaced(y, side)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
