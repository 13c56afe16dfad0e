import pytest
from hypothesis import HealthCheck, settings

import builders

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def registry_and_keys():
    return builders.enrolled_registry()


@pytest.fixture
def poa_chain(registry_and_keys):
    reg, keys = registry_and_keys
    config = builders.poa_config()
    return builders.build_chain(config, reg, keys), config, reg, keys


_CRITERIA: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Record one acceptance verdict; every verdict is echoed in the terminal summary."""

    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} ({detail})"
        _CRITERIA[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[number])
