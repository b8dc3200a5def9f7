import os
import sys

import pytest
from hypothesis import settings

sys.path.insert(0, os.path.dirname(__file__))

from rsasian.model import OptionSpec, validate_model  # noqa: E402

settings.register_profile("default", deadline=None, max_examples=25, derandomize=True)
settings.load_profile("default")


@pytest.fixture(scope="session")
def bench_model():
    return validate_model([[-1, 1], [1, -1]], [0.05, 0.08], [0.2, 0.4], 0.02)


@pytest.fixture(scope="session")
def single_model():
    return validate_model([[0.0]], [0.05], [0.3], 0.01)


@pytest.fixture(scope="session")
def bench_spec():
    return OptionSpec(0.0, 0.0, 1.0, 100.0, 0.0)


def pytest_terminal_summary(terminalreporter):
    import acceptance_log

    if acceptance_log.LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(acceptance_log.LINES):
            terminalreporter.write_line(acceptance_log.LINES[k])
