"""Shared fixtures; the repository root goes on sys.path (flat packages, no install)."""

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from model.reduction import ReducedProblem  # noqa: E402


def make_reduced(rng: np.random.Generator, noise: bool = True, noise_fraction=(0.05, 0.3)) -> ReducedProblem:
    """Random reduced instance; with noise, d_i keeps c_i ||tau_k||^2 - d_i > 0."""
    r = float(rng.uniform(0.2, 1.0))
    c1, c2 = rng.uniform(0.5, 2.0, size=2)
    if noise:
        lo, hi = noise_fraction
        d1 = float(rng.uniform(lo, hi) * c1 * (1 + r ** 2))
        d2 = float(rng.uniform(lo, hi) * c2 * (1 + r ** 2))
    else:
        d1 = d2 = 0.0
    q1, q2 = rng.uniform(0.0, 2.0, size=2)
    return ReducedProblem(q1=float(q1), q2=float(q2), c1=float(c1), c2=float(c2),
                          d1=d1, d2=d2, r=r)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def symmetric_reduced():
    """r=1, c1=c2=1, q1=q2=0, d=0: optimum power 0.5."""
    return ReducedProblem(q1=0.0, q2=0.0, c1=1.0, c2=1.0, d1=0.0, d2=0.0, r=1.0)


@pytest.fixture
def noisy_reduced():
    return ReducedProblem(q1=0.5, q2=1.0, c1=1.0, c2=1.5, d1=0.3, d2=0.4, r=0.6)


@pytest.fixture
def random_reduced():
    """Factory: random_reduced(seed, noise=True)."""
    def factory(seed: int, noise: bool = True, **kwargs) -> ReducedProblem:
        return make_reduced(np.random.default_rng(seed), noise=noise, **kwargs)
    return factory
