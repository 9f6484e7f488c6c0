import numpy as np
import pytest

from ternnet.linalg import Rng
from ternnet.runtime import PackedTernaryVec, StudentLayer, TernaryMlp, pack


@pytest.fixture
def rng():
    return Rng(1234)


def random_student_model(seed: int, dims=(12, 8, 5, 3)) -> TernaryMlp:
    """A structurally valid random ternary network for runtime tests."""
    g = np.random.default_rng(seed)
    layers = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        rows = g.integers(-1, 2, size=(fan_out, fan_in)).astype(np.int8)
        b_lo = g.integers(-3, 1, size=fan_out).astype(np.int32)
        b_hi = b_lo + g.integers(0, 4, size=fan_out).astype(np.int32)
        layers.append(
            StudentLayer(fan_in=fan_in, weights=[pack(r) for r in rows], b_lo=b_lo, b_hi=b_hi)
        )
    return TernaryMlp(layers=layers, meta={"origin": "random-fixture", "seed": seed})


@pytest.fixture
def student_model():
    return random_student_model(7)
