import zlib

import numpy as np
import pytest

from u1bethe import weights as W

ETA = 0.4375


@pytest.fixture(scope="session")
def six():
    return W.six_vertex(ETA)


@pytest.fixture(scope="session")
def spin1():
    return W.higher_spin_xxz(3, ETA)


@pytest.fixture(scope="session")
def spin32():
    return W.higher_spin_xxz(4, ETA)


def points(model, rng, k):
    return tuple(W.random_point(rng, model.sample_window) for _ in range(k))


def rng_for(name, salt=0):
    # crc32, not hash(): string hashing is salted per process and would
    # make the sampled test points differ from run to run
    return np.random.default_rng((zlib.crc32(name.encode()), salt))
