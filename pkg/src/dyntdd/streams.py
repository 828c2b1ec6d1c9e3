"""Counter-based random substreams.

Each random quantity is drawn from a generator keyed by the master seed and a
tuple of integers (purpose tag, draw index, entity index...), so results do
not depend on evaluation order or on how draws are batched across workers.
"""

import numpy as np

# purpose tags
CHANNELS = 1
ESTIMATES = 2
INNER_PRECODER = 3
POWER_NORM = 4
DL_OWN = 5
DL_NEIGHBOR = 6
BRUTE_FORCE = 7


def substream(seed, *key):
    """Independent ``numpy.random.Generator`` for ``(seed, *key)``."""
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1),
                                spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def complex_normal(rng, shape):
    """Standard circularly-symmetric complex Gaussian samples, CN(0, 1)."""
    z = rng.standard_normal(shape + (2,) if isinstance(shape, tuple)
                            else (shape, 2))
    return (z[..., 0] + 1j * z[..., 1]) * np.sqrt(0.5)
