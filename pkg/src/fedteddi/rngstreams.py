"""Deterministic, platform-independent RNG stream derivation.

Every stochastic draw in the simulator (channel gains, compute delays,
mini-batch shuffles, scenario sampling) pulls from a generator derived
from the experiment root seed plus a tuple of tags naming the draw site,
e.g. ``substream(seed, "channel", frame, rnd, client)``.  Parallel
evaluation order therefore cannot change results.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["derive_seed", "substream"]


def derive_seed(*parts: int | str) -> int:
    """Map a tag tuple to a stable 128-bit integer seed.

    Uses SHA-256 over an unambiguous byte encoding, so results do not
    depend on Python's per-process hash randomization or numpy version.
    """
    h = hashlib.sha256()
    for part in parts:
        if isinstance(part, bool) or not isinstance(part, (int, str)):
            raise TypeError(f"seed tags must be int or str, got {type(part).__name__}")
        token = f"i:{part}" if isinstance(part, int) else f"s:{part}"
        h.update(token.encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest()[:16], "big")


def substream(*parts: int | str) -> np.random.Generator:
    """Return an independent generator for the draw site named by ``parts``."""
    return np.random.Generator(np.random.PCG64(derive_seed(*parts)))
