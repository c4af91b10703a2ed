import numpy as np
import pytest

from orlat.weights import constant, validate


@pytest.fixture
def one():
    return constant(1.0)


@pytest.fixture
def bernoulli():
    return validate({"atoms": [[0.0, 0.5], [1.0, 0.5]]})


@pytest.fixture
def uniform():
    return validate({"segments": [[0.0, 1.0, 1.0]]})


@pytest.fixture
def mixed():
    return validate({"atoms": [[0.0, 0.3]], "segments": [[0.5, 2.0, 0.7]]})


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
