import functools

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from capflow import surfaces as sg

settings.register_profile(
    "capflow",
    deadline=None,
    max_examples=30,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("capflow")

ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@functools.lru_cache(maxsize=None)
def cached_surface(name: str, **params):
    return sg.builtin_surface(name, **params)


@functools.lru_cache(maxsize=None)
def cached_index(name: str, flavor: str, h: float = 0.05):
    from capflow.index_lab import build_index_problem

    problem = build_index_problem(cached_surface(name), flavor, h=h)
    return problem, problem.index()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
