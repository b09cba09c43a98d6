"""Deterministic per-entry random streams.

Every random draw in the package comes through here. The generator is pinned
so that a (seed, entry name) pair always yields the same values, on any
machine, in any process, regardless of the order entries are visited:

* bit source: Philox4x64 counter-based generator, keyed with
  ``[seed mod 2^64, sha256(purpose + ":" + name)[:8] as little-endian u64]``;
* uniforms: numpy's 53-bit conversion of successive 64-bit words;
* normals: Box-Muller on uniform pairs, with u1 mapped to (0, 1] so the log
  never sees zero.

Draw i of an entry depends only on (seed, purpose, name, i).
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def name_key(name: str, purpose: str = "values") -> int:
    """Stable 64-bit key for an entry name; purpose separates value and mask streams."""
    digest = hashlib.sha256(f"{purpose}:{name}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def _generator(seed: int, name: str, purpose: str) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[seed & _MASK64, name_key(name, purpose)]))


def uniforms(seed: int, name: str, n: int, purpose: str = "values") -> np.ndarray:
    """n float64 uniforms in [0, 1) from the (seed, name) substream."""
    if n == 0:
        return np.empty(0, dtype=np.float64)
    return _generator(seed, name, purpose).random(n)


def normals(seed: int, name: str, n: int, purpose: str = "values") -> np.ndarray:
    """n float64 standard-normal draws from the (seed, name) substream.

    Prefix-stable in n: the first m draws for any n >= m are identical.
    """
    if n == 0:
        return np.empty(0, dtype=np.float64)
    pairs = (n + 1) // 2
    u = _generator(seed, name, purpose).random(2 * pairs)
    u1, u2 = u[0::2], u[1::2]
    r = np.sqrt(-2.0 * np.log1p(-u1))
    theta = 2.0 * np.pi * u2
    out = np.empty(2 * pairs, dtype=np.float64)
    out[0::2] = r * np.cos(theta)
    out[1::2] = r * np.sin(theta)
    return out[:n]
