from __future__ import annotations

import time

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from egopong.evalharness import ForecastProtocol, build_detection_dataset, run_forecast_protocol

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def detection_samples():
    """The 200-window seeded detection dataset shared by protocol tests."""
    return build_detection_dataset(200, seed=5)


@pytest.fixture(scope="session")
def forecast_cells():
    """All forecasting cells on the default protocol, plus the wall time in ``"elapsed_s"``."""
    t0 = time.perf_counter()
    cells = run_forecast_protocol(ForecastProtocol())
    cells["elapsed_s"] = time.perf_counter() - t0
    return cells


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
