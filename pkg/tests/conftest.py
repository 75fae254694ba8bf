import numpy as np
import pytest

from snrq import CalibBatch


def random_spd(rng: np.random.Generator, n: int, ridge: float = 1.0) -> np.ndarray:
    a = rng.normal(size=(n, 2 * n))
    return a @ a.T + ridge * np.eye(n)


def random_batch(rng: np.random.Generator, n: int, n_seq: int, mismatch: float = 0.3) -> CalibBatch:
    xq = rng.normal(size=(n, n_seq))
    xf = xq + mismatch * rng.normal(size=(n, n_seq))
    return CalibBatch(xf=xf, xq=xq)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
