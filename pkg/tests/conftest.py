import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fdisac.beams import RX_BEAMWIDTHS, TX_BEAMWIDTHS, ArrayGeometry, build_codebook

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def tx_geom():
    return ArrayGeometry(8)


@pytest.fixture(scope="session")
def rx_geom():
    return ArrayGeometry(16, axis_offset=0.15)


@pytest.fixture(scope="session")
def tx_cb(tx_geom):
    return build_codebook(tx_geom, range(50, 131, 5), TX_BEAMWIDTHS, 1.0)


@pytest.fixture(scope="session")
def rx_cb(rx_geom):
    return build_codebook(rx_geom, range(50, 131, 5), RX_BEAMWIDTHS, 0.25)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def acceptance_log(request):
    """Collects one PASS/FAIL line per acceptance criterion for the terminal summary."""
    return request.config.stash.setdefault(ACCEPTANCE, [])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
