import numpy as np
import pytest

from liref.synthdata import random_lightfield, verification_pair


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_pair(rng):
    """3x3 angular, 8x8 spatial verification pair (difference is Nyquist-free)."""
    return verification_pair(rng, 1, 8, 8, 1)


@pytest.fixture
def odd_field(rng):
    """White-noise field on an odd spatial grid: every identity is exact here."""
    return random_lightfield(rng, 1, 9, 9, 1)
