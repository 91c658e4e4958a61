import pytest

from gwlagrange import OffspringSpec, solve


@pytest.fixture(scope="session")
def exp_spec():
    return OffspringSpec.exp()


@pytest.fixture(scope="session")
def geo_spec():
    return OffspringSpec.geometric()


@pytest.fixture(scope="session")
def exp_sol(exp_spec):
    return solve(exp_spec, 1024)


@pytest.fixture(scope="session")
def geo_sol(geo_spec):
    return solve(geo_spec, 1024)
