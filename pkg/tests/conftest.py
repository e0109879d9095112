import numpy as np
import pytest

from trimgossip import Dataset, TopologySpec, build_graph


@pytest.fixture
def k3():
    return build_graph(TopologySpec("complete", 3))


@pytest.fixture
def k5():
    return build_graph(TopologySpec("complete", 5))


@pytest.fixture
def single_edge():
    return build_graph(TopologySpec("complete", 2))


@pytest.fixture
def small_graphs():
    """The four small test graphs used by the oracle/bound checks."""
    return {
        "k3": build_graph(TopologySpec("complete", 3)),
        "k5": build_graph(TopologySpec("complete", 5)),
        "grid3x3": build_graph(TopologySpec("grid2d", 9, rows=3, cols=3)),
        "c5": build_graph(TopologySpec("cycle", 5)),
    }


@pytest.fixture
def dataset123():
    return Dataset(values=np.array([1.0, 2.0, 3.0]))
