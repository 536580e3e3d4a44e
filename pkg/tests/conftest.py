import pytest

import ejsim as ej


@pytest.fixture(scope="session")
def bsc01():
    return ej.bsc(0.1)


@pytest.fixture(scope="session")
def bsc01_consts(bsc01):
    return ej.derive_constants(bsc01)


@pytest.fixture(scope="session")
def ternary():
    return ej.asymmetric_uniform_ternary(0.25)


@pytest.fixture(scope="session")
def ternary_consts(ternary):
    return ej.derive_constants(ternary)
