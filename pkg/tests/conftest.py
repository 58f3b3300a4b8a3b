import pytest

from world import build_ablation_world, build_golden_world


@pytest.fixture(scope="session")
def golden_world():
    return build_golden_world()


@pytest.fixture(scope="session")
def golden_stores(golden_world):
    return golden_world.stores()


@pytest.fixture(scope="session")
def ablation_world():
    return build_ablation_world(200)
