"""Counter-based random number streams for reproducible parallel generation.

Every random draw in the generation pipeline comes from a Philox generator
keyed by (global seed, sample index) with the pipeline stage encoded in the
counter block.  Streams are therefore independent of worker scheduling and
of how much randomness other stages consume: the same (seed, index) always
produces the same sample, with any number of workers.
"""

from __future__ import annotations

import numpy as np

__all__ = ["STAGES", "stream"]

_MASK64 = (1 << 64) - 1

# stage ids reserve disjoint counter blocks within one (seed, index) key
STAGES = {
    "map": 0,
    "svf": 1,
    "affine": 2,
    "gmm": 3,
    "bias": 4,
    "noise": 5,
    "alpha": 6,
}


def stream(seed: int, sample_index: int = 0, stage="map") -> np.random.Generator:
    """Independent Generator for one (seed, sample, stage) triple."""
    stage_id = STAGES[stage] if isinstance(stage, str) else int(stage)
    key = np.array([int(seed) & _MASK64, int(sample_index) & _MASK64], dtype=np.uint64)
    counter = np.array([0, 0, 0, stage_id], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(counter=counter, key=key))
