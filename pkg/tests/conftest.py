import numpy as np
import pytest

from mfg_evolve import build_mac, default_params, game_policies


@pytest.fixture(scope="session")
def mac_game():
    return build_mac(default_params())


@pytest.fixture(scope="session")
def mac_policies(mac_game):
    return game_policies(mac_game)


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
