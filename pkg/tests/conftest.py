import numpy as np
import pytest

from netaudit.network import NetworkConfig, NetworkGraph, build_network

# Agents own 2, 4 and 2 elements; the pool is fully allocated.
EXAMPLE_LINKS = [0, 0, 1, 1, 1, 1, 2, 2]
EXAMPLE_RESOURCES = [0.5, 0.3, 0.2]
# resources / link count, spelled out by hand.
EXAMPLE_VALUES = [0.25, 0.25, 0.075, 0.075, 0.075, 0.075, 0.1, 0.1]


@pytest.fixture
def example_config():
    return NetworkConfig(
        num_agents=3, num_elements=8, links=list(EXAMPLE_LINKS),
        impact=[1.0] * 8, resources=list(EXAMPLE_RESOURCES), pool_total=1.0,
    )


@pytest.fixture
def example_graph(example_config):
    return build_network(example_config)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_graph(seed, num_agents=None, num_elements=None):
    r = np.random.default_rng(seed)
    a = num_agents or int(r.integers(2, 6))
    n = num_elements or int(r.integers(max(a, 4), 17))
    return build_network(NetworkConfig(num_agents=a, num_elements=n, seed=seed))


# Acceptance results, printed after the run whether or not output is captured.
ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, passed, detail in sorted(ACCEPTANCE_RESULTS):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] {number}. {name}: {detail}")
