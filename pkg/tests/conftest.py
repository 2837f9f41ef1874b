"""Shared fixtures for the test suite."""

import numpy as np
import pytest

from vmblab.spectral import Grid
from vmblab.velocity import CollisionModel, HermiteSpace


@pytest.fixture(scope="session")
def grid8():
    return Grid(8)


@pytest.fixture(scope="session")
def grid16():
    return Grid(16)


@pytest.fixture(scope="session")
def space():
    return HermiteSpace(4)


@pytest.fixture(scope="session")
def model():
    return CollisionModel(1.0, "constant")


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
