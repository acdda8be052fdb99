"""Deterministic RNG derivation.

All randomness in the package flows through Philox counter-based
generators keyed by a stable hash of a 64-bit seed plus a context path
(e.g. ``(master_seed, "poisson", p, n, replicate)``), so any unit of
work is reproducible independent of scheduling or process layout.
"""

from __future__ import annotations

import hashlib

import numpy as np


def stable_hash64(*parts) -> int:
    """Hash a tuple of ints/floats/strings to a 64-bit integer.

    Unlike builtin ``hash``, the result is stable across processes and
    platforms (no per-process salting).
    """
    h = hashlib.sha256()
    for part in parts:
        if isinstance(part, float):
            token = f"f:{part!r}"
        elif isinstance(part, (int, np.integer)):
            token = f"i:{int(part)}"
        else:
            token = f"s:{part}"
        h.update(token.encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest()[:8], "little")


def substream(seed: int, *path) -> np.random.Generator:
    """Philox generator for the substream identified by (seed, *path)."""
    h = hashlib.sha256()
    h.update(stable_hash64(seed, *path).to_bytes(8, "little"))
    key = np.frombuffer(h.digest()[:16], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
