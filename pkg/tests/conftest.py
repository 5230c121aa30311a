import numpy as np
import pytest

from services.generators import clique_block_model


@pytest.fixture
def toy():
    """Three cliques of sizes 5, 3, 2 (self-loops included)."""
    return clique_block_model([5, 3, 2])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def d_gram(x: np.ndarray, d: np.ndarray) -> np.ndarray:
    """XᵀDX for a diagonal D given as a vector."""
    return x.T @ (d[:, None] * x)
