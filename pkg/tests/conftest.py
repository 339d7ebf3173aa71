"""Shared fixtures: example bundles are built once per session."""

import numpy as np
import pytest

from berknash.examples import build


@pytest.fixture(scope="session")
def monopoly():
    return build("monopoly")


@pytest.fixture(scope="session")
def taxation():
    return build("taxation")


@pytest.fixture(scope="session")
def regression():
    return build("regression")


@pytest.fixture(scope="session")
def monetary():
    return build("monetary")


@pytest.fixture(scope="session")
def trading():
    return build("trading-independent")


@pytest.fixture(scope="session")
def coordination():
    return build("coordination")


@pytest.fixture(scope="session")
def nonexistence():
    return build("nonexistence")


@pytest.fixture()
def rng():
    return np.random.default_rng(0)
