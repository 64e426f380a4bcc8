"""Named, replayable random streams on a counter-based generator.

Every stochastic operation in the toolkit draws from a stream derived from
a root seed plus a path of labels (e.g. ``stream(seed, "mc", rep_index)`` or
``stream(seed, "channel", sample_id)``). Streams are independent Philox
generators keyed by a hash of the path, so the same (seed, path) replays the
same draws no matter in which order streams are created or which worker
creates them.
"""

from __future__ import annotations

import hashlib

import numpy as np


def stream(seed: int, *path: object) -> np.random.Generator:
    """Return the generator for the given root seed and label path."""
    material = repr((int(seed),) + tuple(str(p) for p in path)).encode()
    digest = hashlib.sha256(material).digest()
    key = np.frombuffer(digest[:16], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
