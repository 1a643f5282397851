"""Deterministic seed fan-out.

A parent seed plus a path of labels (ints or strings) maps to a child seed,
so every stage, restart and fitness call owns an independent reproducible
stream no matter how work is ordered.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _word(key) -> int:
    if isinstance(key, str):
        return int.from_bytes(hashlib.sha256(key.encode("utf-8")).digest()[:8], "little")
    return int(key) & _MASK64


def derive_seed(seed: int, *keys) -> int:
    ss = np.random.SeedSequence([_word(seed)] + [_word(k) for k in keys])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def rng_for(seed: int, *keys) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(
        [_word(seed)] + [_word(k) for k in keys])))
