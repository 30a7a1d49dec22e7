"""Small shared helpers (RNG construction, float formatting)."""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def rng_from_seed(seed: int, *stream: int) -> np.random.Generator:
    """Build a Generator from a 64-bit seed plus optional stream indices.

    Negative seeds are mapped into the unsigned 64-bit range so every
    Python int yields a valid, reproducible generator.
    """
    words = [int(seed) & _MASK64] + [int(s) & _MASK64 for s in stream]
    return np.random.default_rng(words)


def fmt_float(x: float) -> str:
    """Shortest decimal string that round-trips to the same float64."""
    return repr(float(x))
