import numpy as np
import pytest
from hypothesis import settings

from oneproxy.accuracy_model import synthetic
from oneproxy.device_sim import S5E, roofline_predictor
from oneproxy.search_space import cell_space, fbnet_space, mbv2_space

from pinned import LOW_SRCC_CELL_FAMILY, LOW_SRCC_CELL_MEMBER

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture(scope="session")
def mbv2():
    return mbv2_space()


@pytest.fixture(scope="session")
def fbnet():
    return fbnet_space()


@pytest.fixture(scope="session")
def cell4():
    return cell_space(4)


@pytest.fixture(scope="session")
def cell6():
    return cell_space(6)


@pytest.fixture(scope="session")
def cell4_acc(cell4):
    return synthetic(cell4)


@pytest.fixture(scope="session")
def cell4_proxy(cell4):
    return roofline_predictor(S5E, cell4)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def cell4_low_target(cell4_proxy):
    from oneproxy.device_sim import SyntheticDeviceFamilySpec, generate_family

    spec = SyntheticDeviceFamilySpec(base_weights=cell4_proxy, **LOW_SRCC_CELL_FAMILY)
    return generate_family(spec)[LOW_SRCC_CELL_MEMBER]


@pytest.fixture(scope="session")
def cell4_same_target(cell4_proxy):
    """A positively rescaled copy of the proxy (zero-perturbation family member)."""
    from oneproxy.device_sim import SyntheticDeviceFamilySpec, generate_family

    return generate_family(SyntheticDeviceFamilySpec(base_weights=cell4_proxy, member_count=1, seed=0))[0]


@pytest.fixture(scope="session")
def cell4_state(cell4, cell4_proxy, cell4_acc):
    from oneproxy.pareto import ParetoSet
    from oneproxy.pipeline import ProxyState

    return ProxyState("S5e", cell4_proxy, ParetoSet(()), cell4, cell4_acc)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
