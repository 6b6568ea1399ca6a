"""Synthetic test matrices."""
import math

import numpy as np

from .matrix import SparseRowMatrix

GENERATORS = ("gaussian", "spiked-leverage", "tiled-identity")


def gaussian(n, d, seed):
    return SparseRowMatrix(np.random.default_rng(seed).standard_normal((n, d)))


def spiked_leverage(n, d, seed, n_spikes=4, strength=10.0):
    """
    Gaussian matrix with ``n_spikes`` planted rows of norm ``strength * sqrt(n)``
    along coordinate axes. Each spike on its own axis has leverage about
    s^2 / (n + s^2), i.e. 0.99 for the default strength.

    Returns the matrix and the planted row indices.
    """
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, d))
    planted = np.sort(rng.choice(n, size=min(n_spikes, n), replace=False))
    for k, i in enumerate(planted):
        A[i] = 0.0
        A[i, k % d] = strength * math.sqrt(n)
    return SparseRowMatrix(A), planted


def tiled_identity(n, d):
    """Copies of I_d stacked until there are n rows (the last copy truncated)."""
    reps = -(-n // d)
    return SparseRowMatrix(np.tile(np.eye(d), (reps, 1))[:n])


def make(generator, n, d, seed):
    if generator == "gaussian":
        return gaussian(n, d, seed)
    if generator == "spiked-leverage":
        return spiked_leverage(n, d, seed)[0]
    if generator == "tiled-identity":
        return tiled_identity(n, d)
    raise ValueError(f"unknown generator {generator!r}; choose from {', '.join(GENERATORS)}")
