import pytest

from loopworks.fixtures import chain_fixtures, cycle_chain, d3_chain, grid_chain
from loopworks.rng import stream


@pytest.fixture
def d3():
    return d3_chain()


@pytest.fixture
def grid():
    return grid_chain(2, 2)


@pytest.fixture
def cycle4():
    # interior 1 and 3 are each adjacent to both boundary vertices 0 and 2
    return cycle_chain(4, (0, 2))


@pytest.fixture
def rng():
    return stream(12345)


@pytest.fixture(params=sorted(chain_fixtures()))
def fixture_chain(request):
    return chain_fixtures()[request.param]
