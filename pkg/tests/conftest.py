import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "ci",
    derandomize=True,
    max_examples=60,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("ci")

from fuzzyreg.core import DiscreteMeasure
from fuzzyreg.instances import half_graph


@pytest.fixture
def hg4():
    return half_graph(4)


@pytest.fixture
def hg8():
    return half_graph(8)


@pytest.fixture
def u4(hg4):
    return DiscreteMeasure.uniform(hg4.axes[0])


@pytest.fixture
def u4y(hg4):
    return DiscreteMeasure.uniform(hg4.axes[1])


@pytest.fixture
def u8(hg8):
    return DiscreteMeasure.uniform(hg8.axes[0])


@pytest.fixture
def u8y(hg8):
    return DiscreteMeasure.uniform(hg8.axes[1])


def uniform_pair(phi):
    return [DiscreteMeasure.uniform(ax) for ax in phi.axes]
