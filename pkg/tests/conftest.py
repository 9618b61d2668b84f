import pytest

from latsub.specfile import BUNDLED, load_bundled


@pytest.fixture(scope="session")
def systems():
    return {name: load_bundled(name) for name in BUNDLED}


@pytest.fixture(scope="session")
def abcd(systems):
    return systems["abcd"]


@pytest.fixture(scope="session")
def gasket(systems):
    return systems["gasket"]


@pytest.fixture(scope="session")
def example310(systems):
    return systems["example310"]


@pytest.fixture(scope="session")
def period_doubling(systems):
    return systems["period_doubling"]


@pytest.fixture(scope="session")
def thue_morse(systems):
    return systems["thue_morse"]


@pytest.fixture(scope="session")
def chair(systems):
    return systems["chair"]
