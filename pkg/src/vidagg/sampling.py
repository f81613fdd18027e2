"""Even temporal sampling of local feature sequences.

The index rule is center-of-bin: idx(i) = floor((i + 0.5) * N / n) for
i = 0..n-1. It is deterministic, spans the whole sequence, and repeats
indices when n > N so short videos still yield n samples. Whether the
endpoints should be included instead is a convention choice; this rule
deliberately avoids edge bias.
"""

from __future__ import annotations

import numpy as np

#: Sample-count value meaning "use every local feature".
DENSE = "dense"


def sample_indices(source_length: int, n: int) -> np.ndarray:
    """Indices of n evenly spaced rows out of source_length."""
    if n < 1:
        raise ValueError(f"sample count must be >= 1, got {n}")
    if source_length < 1:
        raise ValueError(f"source length must be >= 1, got {source_length}")
    i = np.arange(n, dtype=np.int64)
    # floor((i + 0.5) * N / n) in exact integer arithmetic
    return (2 * i + 1) * source_length // (2 * n)


def sample_evenly(seq: np.ndarray, n: int) -> np.ndarray:
    """Select n evenly spaced rows of seq, temporal order preserved."""
    seq = np.asarray(seq)
    return seq[sample_indices(seq.shape[0], n)]


def dense_plan(seq: np.ndarray) -> np.ndarray:
    """Use every local feature; equals sample_evenly(seq, len(seq))."""
    return np.asarray(seq)
