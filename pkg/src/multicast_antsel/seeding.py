"""Seed derivation shared by every stochastic routine in the package.

All randomness flows through :class:`numpy.random.SeedSequence` feeding a
PCG64 bit generator. Sub-streams for receivers, taps, trials and blocks are
obtained by extending the ``spawn_key`` with integer coordinates, so a stream
depends only on (master seed, coordinates) and never on call order.
"""

from __future__ import annotations

import hashlib
from typing import Union

import numpy as np

SeedLike = Union[int, np.random.SeedSequence]

#: Bit generator used everywhere; recorded in run manifests.
BIT_GENERATOR = "PCG64"


def as_seed_sequence(seed: SeedLike) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if isinstance(seed, (int, np.integer)) and not isinstance(seed, bool):
        if seed < 0:
            raise ValueError(f"seed must be non-negative, got {seed}")
        return np.random.SeedSequence(int(seed))
    raise TypeError(f"unsupported seed type {type(seed).__name__}")


def substream(seed: SeedLike, *coords: int) -> np.random.SeedSequence:
    """Return the child seed at ``coords`` below ``seed``.

    ``substream(s, 2, 5)`` is the same sequence no matter how many other
    sub-streams have been requested before.
    """
    base = as_seed_sequence(seed)
    for c in coords:
        if c < 0:
            raise ValueError(f"substream coordinates must be >= 0, got {coords}")
    return np.random.SeedSequence(
        base.entropy, spawn_key=tuple(base.spawn_key) + tuple(int(c) for c in coords)
    )


def make_rng(seed: SeedLike) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(as_seed_sequence(seed)))


def stable_hash(text: str) -> int:
    """63-bit integer digest of ``text``; stable across processes and runs."""
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1
