"""Scrambled Halton point sets keyed by a numpy Generator."""

import numpy as np
from scipy.stats import qmc


def halton(n, d, rng):
    """``n`` scrambled Halton points in [0, 1)^d; scrambling drawn from ``rng``."""
    return qmc.Halton(d=d, scramble=True, seed=rng).random(n)


def as_rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
