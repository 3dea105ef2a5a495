"""Counter-based random streams keyed by (master seed, degree, trial index).

Every trial draws from its own Philox stream, so results do not depend on how
trials are distributed over worker processes.
"""

import numpy as np

SeededRng = np.random.Generator


def trial_rng(master_seed: int, N: int, trial_index: int) -> SeededRng:
    ss = np.random.SeedSequence([int(master_seed), int(N), int(trial_index)])
    return np.random.Generator(np.random.Philox(ss))


def make_rng(seed: int) -> SeededRng:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))


def complex_normal(rng: SeededRng, size) -> np.ndarray:
    """Standard complex Gaussians (g1 + i g2)/sqrt(2), unit E|a|^2."""
    g = rng.standard_normal((2,) + tuple(np.atleast_1d(size)))
    return (g[0] + 1j * g[1]) * np.sqrt(0.5)
