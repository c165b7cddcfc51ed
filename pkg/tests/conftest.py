import numpy as np
import pytest
from scipy.sparse.csgraph import shortest_path

from bisimagg.core.generators import gen_random


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_semimetric(rng, n: int, low: float = 0.05) -> np.ndarray:
    """Shortest-path closure of random symmetric edge costs in [low, 1]."""
    w = rng.uniform(low, 1.0, size=(n, n))
    w = np.triu(w, 1)
    w = w + w.T
    return shortest_path(w, method="D", directed=False)


def random_distribution(rng, n: int, sparse: bool = False) -> np.ndarray:
    p = rng.dirichlet(np.ones(n))
    if sparse and n > 1:
        keep = rng.random(n) < 0.5
        keep[rng.integers(n)] = True
        p = np.where(keep, p, 0.0)
        p = p / p.sum()
    return p


def random_mdps(count: int, max_states: int, max_actions: int, seed: int = 7):
    rng = np.random.default_rng(seed)
    for i in range(count):
        n = int(rng.integers(2, max_states + 1))
        a = int(rng.integers(1, max_actions + 1))
        branching = int(rng.integers(1, n + 1))
        yield gen_random(n, a, seed=seed * 1000 + i, branching=branching)
