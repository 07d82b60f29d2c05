import numpy as np
import pytest

from toponet.network import NetworkSpec, init_network

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(12345))


def random_net(dims, seed=0, scale=1.0):
    """Net with Gaussian weights and biases (no data-dependent init)."""
    net = init_network(NetworkSpec.from_dims(dims), seed)
    g = np.random.Generator(np.random.PCG64(seed + 7))
    for layer in net.layers:
        layer.W = g.standard_normal(layer.W.shape) * scale
        layer.b = g.standard_normal(layer.b.shape) * scale
    return net
