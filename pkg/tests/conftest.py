import pytest

from bergmanlab.quadrature import RadialGrid


@pytest.fixture(scope="session")
def grid16():
    return RadialGrid.build(levels=16, nodes_per_panel=12)


@pytest.fixture(scope="session")
def grid24():
    return RadialGrid.build(levels=24, nodes_per_panel=16)
