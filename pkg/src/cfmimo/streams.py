"""Deterministic random-stream derivation.

Every random quantity in the package is drawn from a generator derived from
``(master_seed, domain, *indices)`` via :class:`numpy.random.SeedSequence`, so
results are reproducible and independent of scheduling order. The domain tags
keep streams for unrelated purposes (geometry, channel blocks, Monte Carlo
trials, self-checks) disjoint under a single master seed.
"""

import numpy as np

_SEED_MASK = 0xFFFFFFFFFFFFFFFF

# Domain tags (arbitrary distinct constants).
PROFILE_DOMAIN = 11
CHANNEL_DOMAIN = 23
TRIAL_DOMAIN = 37
CHECK_DOMAIN = 53


def derive_rng(master_seed, *key):
    """Generator for the stream identified by ``(master_seed, *key)``.

    ``master_seed`` may be any 64-bit integer (negative values are mapped to
    their unsigned representation); key components must be nonnegative ints.
    """
    entropy = (int(master_seed) & _SEED_MASK,) + tuple(int(k) for k in key)
    return np.random.default_rng(np.random.SeedSequence(entropy))


def complex_normal(rng, shape, var=1.0):
    """Circularly-symmetric complex Gaussian draws, CN(0, var) per entry.

    Real and imaginary parts are i.i.d. N(0, var/2).
    """
    if isinstance(shape, int):
        shape = (shape,)
    z = rng.standard_normal(size=tuple(shape) + (2,)).view(np.complex128)[..., 0]
    z *= np.sqrt(var / 2.0)
    return z
