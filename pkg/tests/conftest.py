import pytest

from blockembed.params import named_profile


@pytest.fixture(scope="session")
def toy1():
    return named_profile("toy1")


@pytest.fixture(scope="session")
def toy_m0_2():
    return named_profile("toy-m0-2")


@pytest.fixture(scope="session")
def toy_m0_3():
    return named_profile("toy-m0-3")


@pytest.fixture(scope="session")
def published_profile():
    return named_profile("published")
