"""
Seeded random streams.

Every consumer derives its own generator from (seed, tag, ...) so that streams
are independent of each other and of evaluation order. Adding trials never
changes the streams of earlier trials.
"""

import zlib
from typing import Union

import numpy as np

from recovery.exceptions import ConfigurationError

Tag = Union[str, int]

# Bumped whenever the derivation changes; recorded in dataset manifests.
GENERATOR_VERSION = 1


def _tag_code(tag: Tag) -> int:
    if isinstance(tag, int):
        if tag < 0:
            raise ConfigurationError(f"stream tags must be non-negative, got {tag}")
        return tag
    return zlib.crc32(tag.encode("utf-8"))


def seed_sequence(seed: int, *tags: Tag) -> np.random.SeedSequence:
    if seed < 0:
        raise ConfigurationError(f"seeds must be non-negative, got {seed}")
    return np.random.SeedSequence([seed, GENERATOR_VERSION, *(_tag_code(tag) for tag in tags)])


def derive_rng(seed: int, *tags: Tag) -> np.random.Generator:
    """Independent generator for the stream named by `tags` under `seed`."""
    return np.random.default_rng(seed_sequence(seed, *tags))


def derive_seed(seed: int, *tags: Tag) -> int:
    """A 63-bit child seed, e.g. the seed of trial k of an experiment."""
    state = seed_sequence(seed, *tags).generate_state(1, dtype=np.uint64)[0]
    return int(state >> np.uint64(1))
