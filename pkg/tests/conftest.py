import pytest

from zdtl.dynsys import default_action, diagonal_action
from zdtl.marker import default_marker
from zdtl.tiling import TilingConfig
from zdtl.towers import tower_marker


@pytest.fixture(scope="session")
def action1():
    return default_action(1)


@pytest.fixture(scope="session")
def action2():
    return default_action(2)


@pytest.fixture(scope="session")
def diag2():
    return diagonal_action(2)


@pytest.fixture(scope="session")
def marker1(action1):
    return default_marker(action1)


@pytest.fixture(scope="session")
def marker2(action2):
    return default_marker(action2)


@pytest.fixture(scope="session")
def config1(marker1):
    return TilingConfig.for_marker(marker1, 1)


@pytest.fixture(scope="session")
def config2(marker2):
    return TilingConfig.for_marker(marker2, 2)


@pytest.fixture(scope="session")
def tmarker1(action1):
    return tower_marker(action1)


@pytest.fixture(scope="session")
def tmarker2(action2):
    return tower_marker(action2)
