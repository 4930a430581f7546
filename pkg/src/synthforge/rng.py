"""Seeded random streams.

Every scene and every camera view gets its own independent generator keyed
by (master seed, procedure, scene index[, view index]), so scenes can be
produced in any order or in parallel with identical results.
"""

from __future__ import annotations

import hashlib

import numpy as np

PROCEDURE_KEYS = {"P1": 1, "P2": 2, "P3": 3, "P4": 4, "P5": 5}
_COMPOSE, _VIEW = 0, 1


def stream(seed: int, *keys: int) -> np.random.Generator:
    """Counter-based (Philox) generator for ``seed`` and an integer key path."""
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


def scene_stream(seed: int, procedure: str, scene_index: int) -> np.random.Generator:
    return stream(seed, PROCEDURE_KEYS[procedure], scene_index, _COMPOSE)


def view_stream(seed: int, procedure: str, scene_index: int, view_index: int) -> np.random.Generator:
    return stream(seed, PROCEDURE_KEYS[procedure], scene_index, _VIEW, view_index)


def image_hash(seed: int, image_index: int) -> int:
    """Stable 64-bit hash used to rank images for the train/test split."""
    digest = hashlib.blake2b(f"{int(seed)}:{int(image_index)}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big")
