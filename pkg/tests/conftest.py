import sys
from functools import lru_cache
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from qbox.eigensolver import solve
from qbox.grid import build_grid
from qbox.model import Potential


def potential(alpha: float) -> Potential:
    return Potential.stark(alpha) if alpha else Potential.uniform()


@lru_cache(maxsize=None)
def cached_solution(bc: str, alpha: float, count: int = 4, n: int = 1001, order: int = 8,
                    method: str = "dense"):
    return solve(build_grid(n, order), potential(alpha), bc, count, method=method)


@pytest.fixture(scope="session")
def grid():
    return build_grid()


@pytest.fixture(scope="session")
def sol():
    """Factory for eigensolutions shared across the whole session."""
    return cached_solution


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_coefficients(rng, size=4):
    c = rng.normal(size=size) + 1j * rng.normal(size=size)
    return c / np.linalg.norm(c)
