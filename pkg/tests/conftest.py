"""Shared fixtures: the Bolza spectrum at small cutoffs and a synthetic spectrum."""

import pytest

from src.fuchsian import load_model
from src.kernels import TestFunctionSpec, WindowParams
from src.spectrum import enumerate_spectrum, synthetic_spectrum
from src.surface_group import Character

# a few distinct lengths with several powers below L = 10
SMALL_LENGTHS = (3.0571418389619964, 3.4, 4.896905, 5.2, 5.828071)


@pytest.fixture(scope="session")
def bolza():
    return load_model("bolza")


@pytest.fixture(scope="session")
def bolza_6(bolza):
    return enumerate_spectrum(bolza, 6.0)


@pytest.fixture(scope="session")
def bolza_10(bolza):
    return enumerate_spectrum(bolza, 10.0)


@pytest.fixture(scope="session")
def small_spectrum():
    return synthetic_spectrum(SMALL_LENGTHS, cutoff=10.0)


@pytest.fixture
def spec():
    return TestFunctionSpec()


@pytest.fixture
def trivial():
    return Character.trivial(2)


@pytest.fixture
def window_10():
    return WindowParams(70.5, 10.0, 80.0)
