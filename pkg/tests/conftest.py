import numpy as np
import pytest

from svcal.models import HestonParams, MarketSlice


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20080916)


@pytest.fixture()
def flat_slice():
    return MarketSlice(forward=1.0, discount=1.0, expiry=1.0)


@pytest.fixture()
def base_heston():
    return HestonParams(v0=0.04, theta=0.04, kappa=1.0, sigma=0.5, rho=-0.7)


def random_heston(rng, kappa_range=(0.05, 8.0)) -> HestonParams:
    return HestonParams(
        v0=float(rng.uniform(0.005, 0.3)),
        theta=float(rng.uniform(0.005, 0.3)),
        kappa=float(rng.uniform(*kappa_range)),
        sigma=float(rng.uniform(0.01, 1.5)),
        rho=float(rng.uniform(-0.95, 0.95)),
    )
