"""Counter-based random streams.

Every stochastic operation takes an explicit seed and derives a named
stream, so runs are bit-reproducible regardless of call order or thread
count.  Streams use the Philox counter-based generator keyed by
(seed, stream id).
"""

import numpy as np

STREAM_CHANNEL_H = 1
STREAM_CHANNEL_V = 2
STREAM_OPTIMIZER = 3
STREAM_USERS = 4
STREAM_CHANNEL_UNI = 5


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Independent generator for (seed, stream)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence((int(seed), int(stream)))))
