import warnings

import pytest

from cvqkd_rr.channel import ChannelParams
from cvqkd_rr.eve import eve_params
from cvqkd_rr.pairing import GridWarning, build_grid


def grid_for(params):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", GridWarning)
        return build_grid(params, eve_params(params).noise_variance)


@pytest.fixture(scope="session")
def ch100():
    return ChannelParams.from_distance(100.0)


@pytest.fixture(scope="session")
def grid100(ch100):
    return grid_for(ch100)


@pytest.fixture(scope="session")
def ch15():
    return ChannelParams.from_distance(15.0)


@pytest.fixture(scope="session")
def grid15(ch15):
    return grid_for(ch15)
