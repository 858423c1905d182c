import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from plsa.corpus import Corpus  # noqa: E402


def random_corpus(rng, D, V, max_count=5, density=0.6):
    """Random dense count matrix with every document non-empty."""
    N = rng.integers(1, max_count + 1, size=(D, V)) * (rng.random((D, V)) < density)
    for d in range(D):
        if N[d].sum() == 0:
            N[d, rng.integers(V)] = 1
    return N


def random_stochastic(rng, shape, low=0.05):
    x = rng.uniform(low, 1.0, size=shape)
    return x / x.sum(axis=-1, keepdims=True)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def tiny_corpus():
    # two documents, 2-term vocabulary
    return Corpus.from_entries(2, 2, [(0, 0, 3), (1, 1, 1)])
