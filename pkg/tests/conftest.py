import math

import numpy as np
import pytest
from hypothesis import settings

from cloudmarket.core import (
    CompletionHistogram,
    Contract,
    PiecewiseUtility,
    PriceSchedule,
)

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

INF = math.inf


@pytest.fixture
def example_utility():
    """Three-interval utility with targets at 10 and 20 minutes."""
    return PiecewiseUtility((0, 10, 20, INF), [(0, 0, 1), (10, 1, 1), (-50, 0, 0)])


@pytest.fixture
def example_prices():
    # 2 cents before 10 minutes, 1.5 before 20, then 1
    return PriceSchedule.constant((0, 10, 20, INF), [2.0, 1.5, 1.0])


def make_contract(probs, times, prices, targets=(0, 10, 20, INF)):
    return Contract("q", {}, targets, probs, times, prices)


def rng_for(seed):
    return np.random.default_rng(seed)


def point_hist(times, masses):
    return CompletionHistogram.from_points(times, masses)


# acceptance outcomes, filled by test_acceptance and echoed after the run
ACCEPTANCE: dict[int, tuple[str, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        status, title = ACCEPTANCE[n]
        terminalreporter.write_line(f"{status} {n:2d} {title}")
