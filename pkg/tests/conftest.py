import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


def pad_to(dist, width):
    out = np.zeros(width)
    out[:dist.probs.size] = dist.probs
    return out


def total_variation(a_dist, b_dist):
    width = max(a_dist.probs.size, b_dist.probs.size)
    return 0.5 * float(np.abs(pad_to(a_dist, width) - pad_to(b_dist, width)).sum())


def bhattacharyya(a_dist, b_dist):
    width = max(a_dist.probs.size, b_dist.probs.size)
    overlap = np.sqrt(pad_to(a_dist, width) * pad_to(b_dist, width)).sum()
    return float(overlap * overlap)


@pytest.fixture
def rng():
    return np.random.default_rng(20240814)
