import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def rayleigh(rng, k, m, scale=1.0):
    return scale * (rng.standard_normal((k, m)) + 1j * rng.standard_normal((k, m))) / np.sqrt(2.0)


_RUNS = {}


def cached_run(cfg):
    """Run a config once per test session (runs are deterministic)."""
    from jfcs.sim import run_simulation
    key = repr(cfg)
    if key not in _RUNS:
        _RUNS[key] = run_simulation(cfg)
    return _RUNS[key]


ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
