"""Counter-based random number streams.

All randomness in the package flows through Philox generators keyed by
``(base_seed, stream)`` with the counter set from ``(step, purpose)``.
Because the stream for any (seed, chain, step) tuple is fixed up front,
chains produce identical draws whether they run serially or in parallel,
and re-running any step regenerates exactly the bytes it consumed.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1


def make_rng(seed: int, stream: int = 0, step: int = 0, purpose: int = 0) -> np.random.Generator:
    """A Generator for one (seed, stream, step, purpose) address."""
    key = (seed & _MASK, stream & _MASK)
    counter = (step & _MASK, purpose & _MASK, 0, 0)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))
