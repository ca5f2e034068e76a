"""Seeded random streams.

Every random draw in the package goes through :func:`make_rng`, which wraps
numpy's counter-based Philox bit generator.  Philox output for a given key is
fixed by its algorithm, and ``Generator.random`` / ``Generator.normal`` /
``Generator.integers`` streams have been stable since numpy 1.17; the
supported numpy range is pinned in ``pyproject.toml``.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["make_rng", "split_seed"]


def make_rng(seed: int) -> np.random.Generator:
    """Return a Philox-backed generator for a non-negative integer seed."""
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    return np.random.Generator(np.random.Philox(int(seed)))


def split_seed(master: int, *keys: object) -> int:
    """Derive a 63-bit child seed from ``master`` and a tuple of keys.

    The child seed is the first 8 bytes of BLAKE2b over
    ``"master|key1|key2|..."``; identical inputs always give the same seed
    and distinct key tuples give (practically) independent streams.
    """
    text = "|".join([str(int(master))] + [str(k) for k in keys])
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") >> 1
