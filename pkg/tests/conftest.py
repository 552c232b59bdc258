import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from netsde.network import build_network

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def edge2():
    return build_network(2, [(0, 1, 1.0)])


@pytest.fixture
def chain3():
    return build_network(3, [(0, 1, 1.0), (1, 2, 2.0)])


@pytest.fixture
def chain3_rec():
    return build_network(3, [(0, 1, 1.0), (1, 2, 1.0)], [0.0, 1.0, 0.0])


def binom_se(p, n):
    return np.sqrt(np.maximum(p * (1 - p), 1e-300) / n)


_ACCEPTANCE = []


@pytest.fixture
def acceptance_log(request):
    """Record a criterion line; shown live and again in the terminal summary."""
    rep = request.config.pluginmanager.get_plugin("terminalreporter")

    def log(line):
        _ACCEPTANCE.append(line)
        if rep is not None:
            rep.write_line("")
            rep.write_line(line)
    return log


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
