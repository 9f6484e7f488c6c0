"""Dense float64 linear algebra, splittable RNG, and activation functions.

Matrices are plain 2-D float64 ndarrays.  All public operations validate
shapes and reject non-finite results, so downstream modules can assume
finite values everywhere.
"""

from __future__ import annotations

import numpy as np


class DimensionError(ValueError):
    """Operand shapes are incompatible."""


def as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got ndim={m.ndim}")
    return m


def matmul(a, b) -> np.ndarray:
    """Matrix product with shape validation and a finiteness guarantee."""
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"cannot multiply {a.shape} by {b.shape}")
    with np.errstate(over="ignore", invalid="ignore"):
        out = a @ b
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("matmul produced non-finite entries")
    return out


class Rng:
    """Deterministic, splittable random generator.

    Wraps a counter-based Philox generator seeded through numpy's
    SeedSequence spawn tree: the same seed always yields the same stream,
    and `split()` hands out child generators that are reproducible
    regardless of scheduling order.
    """

    def __init__(self, seed: int, _seq: np.random.SeedSequence | None = None):
        self.seed = int(seed)
        self._seq = _seq if _seq is not None else np.random.SeedSequence(self.seed)
        self._gen = np.random.Generator(np.random.Philox(self._seq))

    def split(self, n: int) -> list["Rng"]:
        """Derive n independent child generators."""
        return [Rng(self.seed, _seq=child) for child in self._seq.spawn(n)]

    def uniform(self, lo: float, hi: float, size=None):
        if not lo < hi:
            raise ValueError(f"uniform requires lo < hi, got [{lo}, {hi})")
        return self._gen.uniform(lo, hi, size=size)

    def random(self, size=None):
        return self._gen.random(size=size)

    def integers(self, lo: int, hi: int, size=None):
        return self._gen.integers(lo, hi, size=size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self._gen.normal(loc, scale, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def choice(self, n: int, size: int, replace: bool = False) -> np.ndarray:
        return self._gen.choice(n, size=size, replace=replace)


def tanh(x):
    return np.tanh(x)


def tanh_grad(x):
    t = np.tanh(x)
    return 1.0 - t * t


def hard_tanh(x):
    return np.clip(x, -1.0, 1.0)


def hard_tanh_grad(x):
    x = np.asarray(x)
    return ((x > -1.0) & (x < 1.0)).astype(np.float64)


def soft_sign(x):
    return x / (1.0 + np.abs(x))


def soft_sign_grad(x):
    d = 1.0 + np.abs(x)
    return 1.0 / (d * d)


# Activations usable in the teacher's hidden layers: each maps into [-1, 1]
# so |activation| is a valid firing probability.
ACTIVATIONS = {
    "tanh": (tanh, tanh_grad),
    "hard_tanh": (hard_tanh, hard_tanh_grad),
    "soft_sign": (soft_sign, soft_sign_grad),
}


def activation(name: str):
    try:
        return ACTIVATIONS[name]
    except KeyError:
        raise ValueError(f"unknown activation {name!r}; choose from {sorted(ACTIVATIONS)}") from None
