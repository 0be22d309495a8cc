import numpy as np
import pytest

from capred import (
    AlgebraShape,
    Element,
    OptimizerSettings,
    diagonal_projection,
    make_classical_stochastic,
    make_depolarize_corner,
    make_pinching,
)


def diag_pinching(d: int):
    """Pinching of M_d onto its diagonal."""
    return make_pinching([d], [diagonal_projection([d], [k]) for k in range(d)])


def full_depolarize(d: int):
    return make_depolarize_corner([d], Element.identity([d]), name=f"depol[{d}]")


def mixed_fixture():
    """M3 map acting as the identity on one axis and as depolarization on the
    complementary rank-2 corner; its capacity is log 2."""
    return make_depolarize_corner([3], diagonal_projection([3], [0, 1]), name="mixed")


def bsc(p: float):
    return make_classical_stochastic([[1 - p, p], [p, 1 - p]], name=f"bsc{p}")


def random_doubly_stochastic(n: int, seed: int, sweeps: int = 400) -> np.ndarray:
    """Sinkhorn normalization of a positive random matrix."""
    rng = np.random.default_rng(seed)
    t = rng.uniform(0.2, 1.0, size=(n, n))
    for _ in range(sweeps):
        t /= t.sum(axis=1, keepdims=True)
        t /= t.sum(axis=0, keepdims=True)
    return t


def binary_entropy(p: float) -> float:
    """h(p) in nats."""
    out = 0.0
    for q in (p, 1 - p):
        if q > 0:
            out -= q * np.log(q)
    return out


@pytest.fixture
def quick_settings():
    return OptimizerSettings(restarts=4, max_iter=200, tol=1e-7, seed=11)


@pytest.fixture
def shape2():
    return AlgebraShape([2])
