"""Generators of structured exact joints shared by several test modules."""

import numpy as np

from infoviews.oracle import conditionally_independent_joint


def disjoint_ci_joint(rng, m_max=12, k_max=4):
    """Conditionally independent joint whose classes have disjoint supports.

    The first ceil(log2 K) components carry a distinct deterministic code per
    class; the others are free in (0, 1) or, with probability 0.2, fixed.
    """
    k = int(rng.integers(2, k_max + 1))
    width = max(1, int(np.ceil(np.log2(k))))
    m = int(rng.integers(max(2, width), m_max + 1))
    cc = rng.uniform(0.05, 0.95, size=(k, m))
    fixed = rng.random((k, m)) < 0.2
    cc[fixed] = rng.integers(0, 2, fixed.sum())
    cc[:, :width] = [[float((y >> j) & 1) for j in range(width)] for y in range(k)]
    return conditionally_independent_joint(cc, rng.dirichlet(np.ones(k)))
