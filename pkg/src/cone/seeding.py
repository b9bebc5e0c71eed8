"""Named sub-seeds so each pipeline stage draws from its own stream."""

import zlib

import numpy as np


def stage_seed(seed: int, stage: str) -> int:
    """Deterministic 32-bit seed for ``stage`` derived from the run seed."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, zlib.crc32(stage.encode("utf-8"))])
    return int(ss.generate_state(1)[0])


def stage_rng(seed: int, stage: str) -> np.random.Generator:
    return np.random.default_rng(stage_seed(seed, stage))
