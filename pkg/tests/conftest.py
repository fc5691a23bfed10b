import hypothesis
import numpy as np
import pytest

from hpfold import LambdaParams, LatticeGrid, encode, get_sequence

hypothesis.settings.register_profile("ci", max_examples=50, deadline=None)
hypothesis.settings.load_profile("ci")

LAMBDA_STAR = LambdaParams(2.1, 2.4, 3.0)


@pytest.fixture(scope="session")
def s4_model():
    return encode(get_sequence("S4"), LatticeGrid(3, 2), LAMBDA_STAR)


@pytest.fixture(scope="session")
def s6_model():
    return encode(get_sequence("S6"), LatticeGrid(3, 2), LAMBDA_STAR)


@pytest.fixture(scope="session")
def s10_model():
    return encode(get_sequence("S10"), LatticeGrid(4, 3), LAMBDA_STAR)


@pytest.fixture()
def rng():
    return np.random.Generator(np.random.PCG64(1234))


def random_configs(num_vars: int, count: int, seed: int = 0) -> np.ndarray:
    gen = np.random.Generator(np.random.PCG64(seed))
    return (gen.random((count, num_vars)) < 0.5).astype(np.uint8)
