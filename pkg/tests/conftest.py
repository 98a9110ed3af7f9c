"""Shared fixtures: small hand networks and warmed-up compiled kernels."""
import numpy as np
import pytest

from csdmatch import bench, network
from csdmatch.master import build_kernel, sinkhorn_solve


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Load the compiled kernels once so tests never time JIT work."""
    bench.warm_up()
    k = build_kernel(np.array([[1.0]]), np.array([2.0]), 1.0)
    sinkhorn_solve(k, [1.0], [2.0], force_log=True)


@pytest.fixture(scope="session")
def line_net():
    """A-B-C line, unit times, both directions, all nodes are zones."""
    return network.Network(
        nodes=np.array([1, 2, 3]),
        tail=np.array([1, 2, 2, 3]),
        head=np.array([2, 3, 1, 2]),
        time=np.ones(4),
        zones=np.array([1, 2, 3]))


@pytest.fixture(scope="session")
def ring_net():
    """Six-node bidirectional ring with 2-minute links; every node a zone."""
    tails, heads = [], []
    for i in range(6):
        tails += [i + 1, (i + 1) % 6 + 1]
        heads += [(i + 1) % 6 + 1, i + 1]
    return network.Network(
        nodes=np.arange(1, 7),
        tail=np.array(tails),
        head=np.array(heads),
        time=np.full(12, 2.0),
        zones=np.arange(1, 7))


@pytest.fixture(scope="session")
def ring_ttm(ring_net):
    return network.all_zone_times(ring_net)


@pytest.fixture(scope="session")
def bench_net():
    return network.load_benchmark_network()


@pytest.fixture(scope="session")
def bench_ttm(bench_net):
    return network.all_zone_times(bench_net)
