import numpy as np
import pytest

from ufuse.config import ArchConfig, Config, Pulse, Setup, SimConfig

# 4 elements, 8x8 grid, 48 samples: small enough for loop oracles and finite differences
TINY_SIM = dict(n_x=8, n_z=8, n_elem=4, n_t=48, pulse=Pulse(f0=15e6), noise_sigma=0.01,
                defect_width=4e-4, defect_height=2e-4)


def tiny_sim(**overrides) -> SimConfig:
    return SimConfig(**{**TINY_SIM, **overrides})


def tiny_config(**arch) -> Config:
    return Config(tiny_sim(), ArchConfig(**arch))


@pytest.fixture
def tiny_setup():
    return Setup(tiny_sim())


@pytest.fixture(scope="session")
def desk_setup():
    return Setup(SimConfig())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
