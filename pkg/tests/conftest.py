import sys

import pytest
from hypothesis import HealthCheck, settings

from coop_rm.envs import handcrafted_rms
from coop_rm.envs.tasks import _data
from coop_rm.rm_core import deserialize

settings.register_profile("default", max_examples=100, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def a1_rm():
    return handcrafted_rms("three_buttons")[1]


@pytest.fixture(scope="session")
def a2_rm():
    return handcrafted_rms("three_buttons")[2]


@pytest.fixture(scope="session")
def a3_rm():
    return handcrafted_rms("three_buttons")[3]


@pytest.fixture(scope="session")
def a2_learnt_rm():
    return deserialize(_data("rms", "three_buttons_a2_learnt.rm"))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
