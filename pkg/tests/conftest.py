import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from twinbeam import apply_detector_slits, coincidence_map, default_config, prepare_state

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile(
    "default",
    max_examples=40,
    deadline=None,
    suppress_health_check=[HealthCheck.function_scoped_fixture],
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def config():
    return default_config()


@pytest.fixture(scope="session")
def nodove_config(config):
    return config.replace(dove_prism=False)


@pytest.fixture(scope="session")
def dove_state(config):
    return prepare_state(config)


@pytest.fixture(scope="session")
def nodove_state(nodove_config):
    return prepare_state(nodove_config)


@pytest.fixture(scope="session")
def dove_map(dove_state):
    return coincidence_map(dove_state)


@pytest.fixture(scope="session")
def nodove_map(nodove_state):
    return coincidence_map(nodove_state)


@pytest.fixture(scope="session")
def dove_slit(dove_map, config):
    return apply_detector_slits(dove_map, config.slit_width)


@pytest.fixture(scope="session")
def nodove_slit(nodove_map, config):
    return apply_detector_slits(nodove_map, config.slit_width)


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE_LINES

    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
