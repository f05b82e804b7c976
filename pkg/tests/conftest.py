import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from genpe.corpus import example_signal

settings.register_profile(
    "default",
    max_examples=60,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

_ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture
def acceptance_log():
    """Record one (name, passed, detail) line per acceptance criterion."""
    return _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")


@pytest.fixture(scope="session")
def intermittent():
    return example_signal()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
