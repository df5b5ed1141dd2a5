from functools import lru_cache

import numpy as np
import pytest

from fracgrad import assemble, build_grid


@lru_cache(maxsize=None)
def cached_op(n: int, s: float):
    return assemble(build_grid(n), s)


@pytest.fixture
def op_factory():
    return cached_op


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
