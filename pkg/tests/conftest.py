import numpy as np
import pytest

from volterra_mv import BuiltinLinearMeanField, ConstantKernel, TimeGrid


@pytest.fixture
def unit_kernel():
    return ConstantKernel(1.0)


@pytest.fixture
def grid_small():
    return TimeGrid(1.0, 50)


@pytest.fixture
def grid_fine():
    return TimeGrid(1.0, 1000)


@pytest.fixture
def additive_model():
    """b = 0, sigma = 1: pure stochastic convolution."""
    return BuiltinLinearMeanField(a=0.0, b=0.0, sigma0=1.0).coefficients()


@pytest.fixture
def linear_model():
    """b = x + 0.5 mean, sigma = 1."""
    return BuiltinLinearMeanField(a=1.0, b=0.5, sigma0=1.0).coefficients()
