"""Seeded random streams.

Every random draw in the package flows from a single 64-bit root seed
through counter-based Philox generators. Independent streams are derived
by hashing a label path into the seed sequence, so adding a new consumer
never perturbs existing ones.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _label_key(label: str | int) -> int:
    if isinstance(label, (int, np.integer)):
        return int(label) & _MASK64
    digest = hashlib.blake2b(str(label).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def stream(seed: int, *path: str | int) -> np.random.Generator:
    """Return the generator for `path` under the root `seed`.

    The same (seed, path) always yields an identical stream; distinct
    paths yield independent streams.
    """
    ss = np.random.SeedSequence(
        entropy=int(seed) & _MASK64,
        spawn_key=tuple(_label_key(p) for p in path),
    )
    return np.random.Generator(np.random.Philox(ss))
