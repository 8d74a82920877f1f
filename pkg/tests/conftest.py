import numpy as np
import pytest

from setree.generators import karate, two_cliques_bridged


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def karate_graph():
    return karate()


@pytest.fixture(scope="session")
def cliques8():
    return two_cliques_bridged(8)
